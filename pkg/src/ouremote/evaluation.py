"""MSE metrics and bounds.

Two independent routes to the time-average MSE are provided:

* :func:`simulate_long_run` runs complete trajectories: an exactly sampled
  signal on a uniform grid, the FCFS channel, the sampling policy and the
  estimator, and integrates (X - X_hat)^2 over time.
* :class:`~ouremote.solver.CycleBatch` ratios from independent renewal
  cycles.

The noise term of the upper bound is estimated from scalar draws of
(Y, O_Y) only, through Kummer's function, and checked against path-simulated
cycles.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import rng as rngmod
from . import specfun
from .channel import FcfsChannel, NoiseModel, corrupt
from .errors import DomainError, DomainOverflow
from .estimation import EstimatorState, estimate, predict
from .policy import OptimalThreshold, Periodic, ZeroWait, decide_sample
from .process import (
    _BRIDGE_BAND,
    bridge_cross_probability,
    decay,
    default_exit_dt,
    gap_variance,
    mse_lower_bound,
    sample_gap,
)
from .solver import _map, simulate_cycles
from .stats import Estimate, combined_se, mean_estimate, ratio_estimate

WARMUP_CYCLES = 5
# an unstable signal grows like e^{|theta| t}; trajectories are kept short
# enough that this growth stays below UNSTABLE_GROWTH, so O(1) errors keep
# about ten significant digits after the cancellation X - X_hat
UNSTABLE_GROWTH = 1e6
LEMMA_SERVICE_DRAWS = 10**6


def default_grid_dt(policy, params, service):
    """Signal grid for long-run simulation.

    Threshold policies need sigma sqrt(dt) <= v / 50 for crossing detection;
    every policy keeps dt <= E[Y] / 500 so grid-rounded delivery times
    stretch service by a negligible amount.
    """
    dt = service.mean / 500.0
    if isinstance(policy, OptimalThreshold) and policy.v > 0:
        dt = min(dt, default_exit_dt(policy.v, params))
    if isinstance(policy, Periodic):
        dt = min(dt, policy.period / 500.0)
    return dt


class _SignalGrid:
    """Exactly sampled signal X_k = X(k dt), generated forward in chunks."""

    def __init__(self, params, x0, dt, rng, chunk=1 << 15):
        self.mu = params.mu
        self.a = decay(dt, params)
        self.s = math.sqrt(gap_variance(dt, params))
        self.rng = rng
        self.chunk = chunk
        self.buf = np.array([x0 - params.mu])
        self.offset = 0

    def get(self, k0, k1):
        """Values at grid indices k0..k1 inclusive."""
        need = k1 + 1 - (self.offset + self.buf.size)
        if need > 0:
            m = max(need, self.chunk)
            new, _ = lfilter([self.s], [1.0, -self.a], self.rng.standard_normal(m),
                             zi=[self.a * self.buf[-1]])
            self.buf = np.concatenate([self.buf, new])
        return self.buf[k0 - self.offset:k1 + 1 - self.offset] + self.mu

    def drop_before(self, k):
        self.get(k, k)
        cut = k - self.offset
        if cut > 0:
            self.buf = self.buf[cut:]
            self.offset = k


def _grid_index(t, dt):
    k = int(math.ceil(t / dt))
    return k + 1 if k * dt < t else k


def _threshold_index(sig, kd, pkt, policy, params, dt, g_pol, bridge, limit):
    """First grid index in [kd, limit] at which the noise-free error reaches v.

    Returns None if the error stays below v up to ``limit``.
    """
    v = policy.v
    band = v - _BRIDGE_BAND * params.sigma * math.sqrt(dt)
    length = max(256, int(4.0 * (v / params.sigma) ** 2 / dt))
    start = kd
    prev = None
    while start <= limit:
        k1 = min(start + length - 1, limit)
        x = sig.get(start, k1)
        t = np.arange(start, k1 + 1) * dt
        err = x - predict(pkt.x, pkt.s, t, params)
        fire = decide_sample(t, x, x - err, True, policy)
        hit = np.flatnonzero(fire)
        first = hit[0] if hit.size else err.size
        if bridge:
            lead = np.concatenate([[prev if prev is not None else np.inf], err[:first]])
            a, b = lead[:-1], lead[1:]
            cand = (np.abs(a) < v) & (np.abs(b) < v) & ((np.abs(a) > band) | (np.abs(b) > band))
            j = np.flatnonzero(cand)
            if j.size:
                p = bridge_cross_probability(a[j], b[j], v, params.sigma, dt)
                soft = j[g_pol.random(j.size) < p]
                if soft.size:
                    first = min(first, soft[0])
        if first < err.size:
            return start + int(first)
        prev = err[-1]
        start = k1 + 1
        length *= 2
    return None


@dataclass
class TrajectoryTotals:
    err_clean: float
    err_noisy: float
    time: float
    cycles: int
    warmed_up: bool = True


class _Acc:
    def __init__(self):
        self.err_c = self.err_n = self.time = 0.0
        self.cycles = 0

    def add(self, e_clean, e_noisy, steps, dt):
        self.err_c += dt * (np.sum(e_clean**2) - 0.5 * (e_clean[0] ** 2 + e_clean[-1] ** 2))
        self.err_n += dt * (np.sum(e_noisy**2) - 0.5 * (e_noisy[0] ** 2 + e_noisy[-1] ** 2))
        self.time += steps * dt


def _trajectory(policy, params, service, noise, dt, horizon, seed, idx, bridge, x0, warmup):
    """One trajectory from t = 0.

    Error is counted after ``warmup`` delivery-to-delivery cycles, for
    ``horizon`` time units, stopping at a delivery or mid-cycle if the
    budget runs out.  If the warm-up cycles alone do not complete within
    ``horizon`` after D_0 (a policy that almost never samples), counting
    starts at D_0 instead.
    """
    g_sig = rngmod.stream(seed, rngmod.SIGNAL, idx)
    g_srv = rngmod.stream(seed, rngmod.SERVICE, idx)
    g_noise = rngmod.stream(seed, rngmod.NOISE, idx)
    g_pol = rngmod.stream(seed, rngmod.PATH, idx)
    x0 = params.mu if x0 is None else x0
    sig = _SignalGrid(params, x0, dt, g_sig)
    chan = FcfsChannel(x0, corrupt(x0, noise, g_noise), float(service.draw(g_srv)))
    est = EstimatorState(params, x0)
    pkt = chan.submitted[0]
    kd = _grid_index(pkt.d, dt)
    budget = max(1, int(round(horizon / dt)))
    since_d0, counted = _Acc(), None
    stop = kd + budget
    cycle = 0
    while True:
        for p in chan.deliveries_until(kd * dt):
            est.deliver(p)
        assert chan.idle(kd * dt)
        if cycle == warmup and counted is None:
            counted = _Acc()
            stop = kd + budget
        if isinstance(policy, OptimalThreshold):
            ks = kd if policy.v == 0 else _threshold_index(sig, kd, pkt, policy, params, dt,
                                                            g_pol, bridge, stop)
        elif isinstance(policy, ZeroWait):
            ks = kd
        elif isinstance(policy, Periodic):
            ks = max(kd, _grid_index(pkt.s + policy.period, dt))
        else:
            raise TypeError("unknown policy %r" % (policy,))
        if ks is None or ks >= stop:
            kd_new, nxt = stop, None
        else:
            x_new = float(sig.get(ks, ks)[0])
            nxt = chan.submit(ks * dt, x_new, corrupt(x_new, noise, g_noise),
                              float(service.draw(g_srv)))
            kd_new = _grid_index(nxt.d, dt)
        if nxt is None or kd_new > stop:
            kd_new = stop
        xs = sig.get(kd, kd_new)
        t = np.arange(kd, kd_new + 1) * dt
        e_clean = xs - predict(pkt.x, pkt.s, t, params)
        e_noisy = xs - estimate(t, est)
        acc = counted if counted is not None else since_d0
        acc.add(e_clean, e_noisy, kd_new - kd, dt)
        acc.cycles += 1
        cycle += 1
        if kd_new >= stop:
            return TrajectoryTotals(acc.err_c, acc.err_n, acc.time, acc.cycles,
                                    counted is not None)
        pkt, kd = nxt, kd_new
        sig.drop_before(kd)


@dataclass
class LongRunResult:
    mse_clean: Estimate
    mse_noisy: Estimate
    noise_gap: Estimate
    n_cycles: int
    total_time: float
    dt: float
    trajectories: list = field(default_factory=list)


def simulate_long_run(policy, params, service, noise=None, horizon=20000.0, seed=0,
                      n_traj=16, dt=None, bridge=True, x0=None, warmup=WARMUP_CYCLES,
                      workers=1):
    """Time-average squared error over ``n_traj`` independent trajectories.

    ``horizon`` is the total post-warm-up time, split evenly over the
    trajectories; each one stops exactly when its share is used up.  The
    sampler always compares the signal with the noise-free reconstruction
    from the delivered sample, so sampling times do not depend on the noise
    and the noisy and noise-free errors come from the same trajectory.

    For an unstable signal (theta < 0) ``n_traj`` is raised as needed so no
    trajectory is longer than log(UNSTABLE_GROWTH) / |theta|.
    """
    noise = noise or NoiseModel()
    if n_traj < 2:
        raise DomainError("need at least two trajectories for an error estimate")
    if params.theta < 0 and not params.is_wiener:
        longest = math.log(UNSTABLE_GROWTH) / -params.theta
        n_traj = max(n_traj, math.ceil(horizon / longest))
    if dt is None:
        dt = default_grid_dt(policy, params, service)
    share = horizon / n_traj
    jobs = [(policy, params, service, noise, dt, share, seed, i, bridge, x0, warmup)
            for i in range(n_traj)]
    runs = _map(_trajectory, jobs, workers)
    ec = np.array([r.err_clean for r in runs])
    en = np.array([r.err_noisy for r in runs])
    tt = np.array([r.time for r in runs])
    if not (np.all(np.isfinite(ec)) and np.all(np.isfinite(en))):
        raise DomainOverflow("non-finite squared error; the signal left the float range")
    return LongRunResult(
        mse_clean=ratio_estimate(ec, tt),
        mse_noisy=ratio_estimate(en, tt),
        noise_gap=ratio_estimate(en - ec, tt),
        n_cycles=int(sum(r.cycles for r in runs)),
        total_time=float(tt.sum()),
        dt=dt,
        trajectories=runs,
    )


def long_run_mse(policy, params, service, noise=None, horizon=20000.0, seed=0, **kw):
    """Long-run MSE seen by the estimator (with noise if ``noise`` is given)."""
    res = simulate_long_run(policy, params, service, noise, horizon, seed, **kw)
    return res.mse_noisy


def service_laplace(service, s, n=LEMMA_SERVICE_DRAWS, seed=0):
    """E[e^{-s Y}] in closed form when available, else from ``n`` draws."""
    lap = service.laplace(s)
    if lap is not None:
        return lap
    y = service.draw(rngmod.stream(seed, rngmod.SERVICE_MEAN), n)
    return float(np.mean(np.exp(-s * y)))


def noise_term_lemma1(v, params, service, n=10**6, seed=0, laplace_draws=LEMMA_SERVICE_DRAWS):
    """E[integral over a cycle of e^{-2 theta (t - S_i)}] from scalar draws.

        (1/2theta) E[ e^{-2theta Y} {1 - min(1, M(thetaO_Y^2/sigma^2) / M(theta v^2/sigma^2))
                                      E[e^{-2theta Y'}]} ]

    with M = M(1, 1/2, .).  Only Y and O_Y are sampled; E[e^{-2theta Y'}]
    comes from an independent estimate.  Stable signals only.
    """
    if not params.theta > 0 or params.is_wiener:
        raise DomainError("the scalar formula needs theta > 0")
    if v < 0:
        raise DomainError("threshold must be >= 0")
    th, s2 = params.theta, params.sigma**2
    g = rngmod.stream(seed, rngmod.LEMMA)
    y = np.asarray(service.draw(g, n), dtype=float)
    o = sample_gap(y, params, g).value
    lap = service_laplace(service, 2.0 * th, laplace_draws, seed)
    zv = th * v * v / s2
    if zv > specfun.KUMMER_MAX:
        hit_ratio = np.zeros_like(o)
    else:
        # |O| >= v gives a ratio >= 1, which the min clips to 1 anyway
        zq = th * np.minimum(o * o, v * v) / s2
        hit_ratio = np.minimum(1.0, specfun.kummer_1f1_1_half(zq) / specfun.kummer_1f1_1_half(zv))
    vals = np.exp(-2.0 * th * y) * (1.0 - hit_ratio * lap) / (2.0 * th)
    return mean_estimate(vals)


def path_discount_integral(v, params, service, n=10**5, seed=0, **kw):
    """Path-simulated E[integral over a cycle of e^{-2 theta (t - S_i)}]."""
    cycles = simulate_cycles(OptimalThreshold(v), params, service, n, seed, **kw)
    return mean_estimate(cycles.discount_integral)


@dataclass
class MseReport:
    mse_lower: float
    mse_no_noise: float
    mse_with_noise_sim: float
    mse_upper_formula: float
    noise_term: float
    se_no_noise: float = math.nan
    se_with_noise_sim: float = math.nan
    se_upper_formula: float = math.nan
    se_noise_term: float = math.nan
    mse_no_noise_sim: float = math.nan
    se_no_noise_sim: float = math.nan
    noise_gap_sim: float = math.nan
    se_noise_gap_sim: float = math.nan

    def to_dict(self):
        return asdict(self)


def policy_report(policy, params, service, noise, n=20000, seed=0, lemma_draws=10**6,
                  horizon=None, workers=1, n_traj=16, dt=None):
    """Noise-free MSE, the noisy-sample upper bound and a simulation check.

    upper = mse_no_noise + (b1 + b2) E[discount integral] / E[duration], with
    the first term from ``n`` noise-free cycles.  The discount integral comes
    from the scalar formula for a threshold policy with theta > 0 and from
    the same cycles otherwise.  The simulated noisy MSE comes from
    :func:`simulate_long_run` over ``horizon`` time units (default: the total
    duration of the cycles).
    """
    cycles = simulate_cycles(policy, params, service, n, seed, dt=dt, workers=workers,
                             tag=rngmod.VALIDATE + 100)
    base = cycles.mse()
    dur = mean_estimate(cycles.duration)
    if isinstance(policy, OptimalThreshold) and params.theta > 0 and not params.is_wiener:
        disc = noise_term_lemma1(policy.v, params, service, lemma_draws, seed)
    else:
        disc = mean_estimate(cycles.discount_integral)
    b = noise.total_variance
    term = b * disc.value / dur.value
    term_se = b * math.hypot(disc.se / dur.value, disc.value * dur.se / dur.value**2)
    if horizon is None:
        horizon = float(np.sum(cycles.duration))
    run = simulate_long_run(policy, params, service, noise, horizon, seed, workers=workers,
                            n_traj=n_traj, dt=dt)
    return MseReport(
        mse_lower=mse_lower_bound(service, params, seed=seed),
        mse_no_noise=base.value,
        mse_with_noise_sim=run.mse_noisy.value,
        mse_upper_formula=base.value + term,
        noise_term=term,
        se_no_noise=base.se,
        se_with_noise_sim=run.mse_noisy.se,
        se_upper_formula=combined_se(base.se, term_se),
        se_noise_term=term_se,
        mse_no_noise_sim=run.mse_clean.value,
        se_no_noise_sim=run.mse_clean.se,
        noise_gap_sim=run.noise_gap.value,
        se_noise_gap_sim=run.noise_gap.se,
    )


def mse_upper_bound(solution, params, service, noise, n=20000, seed=0, lemma_draws=10**6,
                    horizon=None, workers=1, n_traj=16, dt=None):
    """:func:`policy_report` for the threshold policy of a solved problem."""
    policy = OptimalThreshold(solution.v, solution.beta)
    return policy_report(policy, params, service, noise, n, seed, lemma_draws, horizon,
                         workers, n_traj, dt)
