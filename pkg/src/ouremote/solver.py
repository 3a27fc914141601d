"""Renewal-cycle simulation and the stochastic root finder for beta.

A cycle runs from one delivery D_i to the next, D_{i+1}.  Because every
implemented policy waits for an idle channel, D_i = S_i + Y_i and the
estimation error over the cycle is the gap process O restarted at S_i,
observed on [Y_i, Y_i + W_i + Y_{i+1}] where W_i is the policy's waiting
time after delivery (the exit time of |O| from (-v, v) for the threshold
policy).  Cycles are therefore simulated as independent draws of
(Y_i, O, Y_{i+1}); the long-run average is the ratio of cycle means.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import BracketFailure, DomainError, NonConvergence
from .policy import OptimalThreshold, Periodic, ZeroWait, threshold_v
from .process import (
    default_exit_dt,
    first_passage,
    gap_variance,
    integrate_segment,
    mse_lower_bound,
    sample_gap,
)
from .stats import Estimate, ratio_estimate

log = logging.getLogger(__name__)

BATCH = 4096
SEGMENT_STEPS = 64
_SEGMENT = 11


@dataclass(frozen=True)
class CycleRecord:
    duration: float
    err_integral: float
    discount_integral: float


@dataclass
class CycleBatch:
    """Per-cycle arrays; indexing yields :class:`CycleRecord` objects."""

    duration: np.ndarray
    err_integral: np.ndarray
    discount_integral: np.ndarray
    y: np.ndarray
    wait: np.ndarray
    y_next: np.ndarray
    exit_value: np.ndarray

    def __len__(self):
        return self.duration.size

    def __getitem__(self, i):
        return CycleRecord(float(self.duration[i]), float(self.err_integral[i]),
                           float(self.discount_integral[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def concat(cls, parts):
        names = ("duration", "err_integral", "discount_integral", "y", "wait", "y_next", "exit_value")
        return cls(*(np.concatenate([getattr(p, k) for p in parts]) for k in names))

    def mse(self):
        """Cycle-ratio MSE, mean error integral over mean duration."""
        return ratio_estimate(self.err_integral, self.duration)


def discount_integral(y, length, params):
    """Integral of e^{-2 theta s} for s from y to y + length."""
    if params.is_wiener:
        return np.asarray(length, dtype=float).copy()
    th = params.theta
    return np.exp(-2.0 * th * y) * -np.expm1(-2.0 * th * length) / (2.0 * th)


def _default_max_duration(policy, params, service):
    scale = service.mean
    if isinstance(policy, OptimalThreshold):
        scale = max(scale, (policy.v / params.sigma) ** 2)
    if isinstance(policy, Periodic):
        scale = max(scale, policy.period)
    return 1000.0 * scale


def _cycle_batch(policy, params, service, m, seed, tag, b, dt, crn, bridge, max_duration,
                 segment_steps):
    g_srv = rngmod.stream(seed, tag, b, rngmod.SERVICE)
    g_gap = rngmod.stream(seed, tag, b, rngmod.GAP)
    g_path = rngmod.stream(seed, tag, b, rngmod.PATH)
    g_seg = rngmod.stream(seed, tag, b, _SEGMENT)
    y = np.asarray(service.draw(g_srv, m), dtype=float)
    y_next = np.asarray(service.draw(g_srv, m), dtype=float)
    o_y = sample_gap(y, params, g_gap).value
    if isinstance(policy, OptimalThreshold) and policy.v > 0:
        step = dt if dt is not None else default_exit_dt(policy.v, params)
        fp = first_passage(o_y, policy.v, params, step, g_path, max_duration=max_duration,
                           bridge=bridge, crn=crn)
        wait, o_start, area_wait = fp.z, fp.exit_value, fp.sq_integral
    elif isinstance(policy, Periodic):
        wait = np.maximum(policy.period - y, 0.0)
        o_start, area_wait = integrate_segment(o_y, wait, params, g_path, segment_steps)
    elif isinstance(policy, (OptimalThreshold, ZeroWait)):
        wait, o_start, area_wait = np.zeros(m), o_y, np.zeros(m)
    else:
        raise TypeError("unknown policy %r" % (policy,))
    _, area_service = integrate_segment(o_start, y_next, params, g_seg, segment_steps)
    duration = wait + y_next
    return CycleBatch(
        duration=duration,
        err_integral=area_wait + area_service,
        discount_integral=discount_integral(y, duration, params),
        y=y,
        wait=wait,
        y_next=y_next,
        exit_value=o_start,
    )


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def simulate_cycles(policy, params, service, n, seed, dt=None, crn=False, bridge=True,
                    max_duration=None, workers=1, tag=rngmod.PATH, batch=BATCH,
                    segment_steps=SEGMENT_STEPS):
    """Simulate ``n`` independent noiseless renewal cycles under ``policy``.

    Cycles are drawn in batches seeded by ``(seed, tag, batch_index)`` so the
    result does not depend on ``workers``.  Each cycle starts from the exact
    stationary cycle law, so no warm-up is needed.

    Raises :class:`NonConvergence` if a threshold wait exceeds
    ``max_duration``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if max_duration is None:
        max_duration = _default_max_duration(policy, params, service)
    jobs = [
        (policy, params, service, m, seed, tag, b, dt, crn, bridge, max_duration, segment_steps)
        for b, m in enumerate(rngmod.split_counts(n, batch))
    ]
    return CycleBatch.concat(_map(_cycle_batch, jobs, workers))


def beta_residual(beta, cycles):
    """mean(err_integral) - beta * mean(duration) and its standard error.

    For i.i.d. cycles the jackknife error of this mean coincides with the
    classical std / sqrt(n).
    """
    r = cycles.err_integral - beta * cycles.duration
    n = r.size
    se = float(np.std(r, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Estimate(float(np.mean(r)), se, n)


@dataclass
class PolicySolution:
    beta: float
    v: float
    n_cycles: int
    residual: float
    ci_halfwidth: float
    mse_y: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "beta": self.beta,
            "v": self.v,
            "n_cycles": self.n_cycles,
            "residual": self.residual,
            "ci_halfwidth": self.ci_halfwidth,
            "mse_y": self.mse_y,
            "diagnostics": self.diagnostics,
        }


class _Residual:
    """Residual as a deterministic function of beta under common random numbers."""

    def __init__(self, params, service, mse_y, n, seed, workers, bridge, dt=None):
        self.params = params
        self.service = service
        self.mse_y = mse_y
        self.n = n
        self.seed = seed
        self.workers = workers
        self.bridge = bridge
        self.dt = dt
        self.history = []

    def __call__(self, beta):
        v = threshold_v(beta, self.params, self.mse_y)
        cycles = simulate_cycles(OptimalThreshold(v, beta), self.params, self.service, self.n,
                                 self.seed, dt=self.dt, crn=True, bridge=self.bridge,
                                 workers=self.workers, tag=rngmod.SEARCH)
        res = beta_residual(beta, cycles)
        self.history.append((beta, res.value, res.se))
        log.debug("beta=%.8g v=%.6g residual=%.4g se=%.3g", beta, v, res.value, res.se)
        return res


def _check_monotone(history, k=3.0):
    pts = sorted(history)
    worst = 0.0
    for (b0, r0, s0), (b1, r1, s1) in zip(pts, pts[1:]):
        rise = r1 - r0
        worst = max(worst, rise / max(math.hypot(s0, s1), 1e-300))
    return worst


def solve_beta(params, service, tol_rel=1e-3, seed=0, n_search=2000, n_final=20000,
               workers=1, bridge=True, max_iter=60, max_doublings=60, mse_y=None, dt=None):
    """Root of E[err over cycle] - beta E[cycle length] = 0.

    Bisection on beta with common random numbers: every residual evaluation
    reuses the seed, so the residual is a deterministic function of beta.
    The bracket is [mse_y, c (1 - 1e-6)] with c = sigma^2/(2 theta) for a
    stable signal, whose upper end is known to have a negative residual
    because no policy can exceed the stationary variance; for theta <= 0 the
    upper end is found by doubling.

    After bisection one cycle-ratio step on ``n_final`` fresh cycles refines
    beta (the MSE is stationary in the threshold at the optimum, so the error
    of this step is second order in the bisection error).  The refined beta
    is then validated on another ``n_final`` independent cycles.

    ``dt`` overrides the first-passage grid step (default sigma sqrt(dt) = v/50).
    """
    if mse_y is None:
        mse_y = mse_lower_bound(service, params, seed=seed)
    if not math.isfinite(mse_y):
        raise DomainError("mse_y is not finite")
    f = _Residual(params, service, mse_y, n_search, seed, workers, bridge, dt)
    diagnostics = {"mse_y": mse_y, "doublings": 0, "bracket_flag": False}

    lo = mse_y
    r_lo = f(lo)
    if r_lo.value < -2.0 * r_lo.se:
        raise BracketFailure("residual negative at the lower bound mse_y", lo, None, r_lo.value, None)

    if params.theta > 0 and not params.is_wiener:
        c = params.stationary_variance
        hi = c * (1.0 - 1e-6)
        r_hi = None  # negative by the stationary-variance bound
    else:
        step = max(mse_y, params.sigma**2 * service.mean)
        hi, r_hi = None, None
        for k in range(max_doublings):
            cand = mse_y + step * 2.0**k
            r = f(cand)
            if r.value < 0:
                hi, r_hi = cand, r
                diagnostics["doublings"] = k + 1
                break
            lo, r_lo = cand, r
        if hi is None:
            raise BracketFailure("no sign change after %d doublings" % max_doublings,
                                 mse_y, cand, r_lo.value, r.value)
        if diagnostics["doublings"] > 20:
            diagnostics["bracket_flag"] = True
            log.warning("upper bracket needed %d doublings", diagnostics["doublings"])

    last = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        try:
            last = f(mid)
        except NonConvergence:
            # a stable signal with a threshold this far out never exits in
            # practice: its residual is negative
            if params.theta > 0:
                hi = mid
                continue
            raise
        if last.value > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol_rel * mid and abs(last.value) <= 2.0 * last.se:
            break
    beta_search = 0.5 * (lo + hi)
    diagnostics["bracket"] = [lo, hi]
    diagnostics["search_beta"] = beta_search
    diagnostics["history"] = [list(h) for h in f.history]
    diagnostics["monotone_worst_z"] = _check_monotone(f.history)
    if diagnostics["monotone_worst_z"] > 4.0:
        raise NonConvergence("residual not monotone in beta beyond noise (z=%.2f)"
                             % diagnostics["monotone_worst_z"])

    v_search = threshold_v(beta_search, params, mse_y)
    polish = simulate_cycles(OptimalThreshold(v_search, beta_search), params, service, n_final,
                             seed, dt=dt, bridge=bridge, workers=workers, tag=rngmod.POLISH)
    beta = polish.mse().value
    if params.theta > 0 and not params.is_wiener:
        beta = min(beta, params.stationary_variance * (1.0 - 1e-6))
    beta = max(beta, mse_y)
    v = threshold_v(beta, params, mse_y)

    check = simulate_cycles(OptimalThreshold(v, beta), params, service, n_final, seed, dt=dt,
                            bridge=bridge, workers=workers, tag=rngmod.VALIDATE)
    res = beta_residual(beta, check)
    ratio = check.mse()
    diagnostics["validation_mse"] = ratio.value
    diagnostics["validation_se"] = ratio.se
    diagnostics["residual_se"] = res.se
    diagnostics["mean_duration"] = float(np.mean(check.duration))
    return PolicySolution(
        beta=beta,
        v=v,
        n_cycles=len(check),
        residual=res.value,
        ci_halfwidth=ratio.ci_halfwidth,
        mse_y=mse_y,
        diagnostics=diagnostics,
    )
