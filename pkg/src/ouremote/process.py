"""Ornstein-Uhlenbeck signal model, exact transitions and the gap process.

The signal solves ``dX = theta (mu - X) dt + sigma dW``.  Over a step ``dt``
the exact conditional law is Gaussian with

    mean = x e^{-theta dt} + mu (1 - e^{-theta dt})
    var  = sigma^2 (1 - e^{-2 theta dt}) / (2 theta)      (sigma^2 dt at theta = 0)

The same variance expression holds for theta < 0, where both factors are
negative.  The *gap process* O_t is the OU process started at O_0 = 0 with
mu = 0; it is the estimation error accrued since the last sample.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, NonConvergence

THETA_EPS = 1e-10
# per-step std of the gap path is at most v / STEPS_PER_THRESHOLD
STEPS_PER_THRESHOLD = 50
_BRIDGE_BAND = 3.0


@dataclass(frozen=True)
class OuParams:
    theta: float
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.mu)):
            raise DomainError("theta and mu must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError("sigma must be > 0")

    @property
    def regime(self):
        if abs(self.theta) < THETA_EPS:
            return "wiener"
        return "stable" if self.theta > 0 else "unstable"

    @property
    def is_wiener(self):
        return abs(self.theta) < THETA_EPS

    @property
    def stationary_variance(self):
        """sigma^2 / (2 theta); infinite unless the process is stable."""
        if self.theta < THETA_EPS:
            return math.inf
        return self.sigma**2 / (2.0 * self.theta)


@dataclass
class GapSample:
    y: object
    value: object


def decay(u, params):
    """e^{-theta u}, the weight the estimator keeps on the last sample."""
    theta = 0.0 if params.is_wiener else params.theta
    out = np.exp(-theta * np.asarray(u, dtype=float))
    return float(out) if np.ndim(u) == 0 else out


def gap_variance(y, params):
    """Var[O_y | O_0 = 0].  Accepts scalars or arrays."""
    ya = np.asarray(y, dtype=float)
    s2 = params.sigma**2
    if params.is_wiener:
        out = s2 * ya
    else:
        th = params.theta
        out = -s2 * np.expm1(-2.0 * th * ya) / (2.0 * th)
    return float(out) if np.ndim(y) == 0 else out


def transition_sample(x, dt, params, rng):
    """Draw X_{t+dt} given X_t = x from the exact transition law."""
    dta = np.asarray(dt, dtype=float)
    if np.any(dta < 0):
        raise DomainError("dt must be >= 0")
    a = decay(dta, params)
    mean = np.asarray(x, dtype=float) * a + params.mu * (1.0 - a)
    std = np.sqrt(gap_variance(dta, params))
    shape = np.broadcast(mean, std).shape
    out = mean + std * rng.standard_normal(shape)
    return float(out) if out.ndim == 0 else out


def sample_gap(y, params, rng):
    """O_y ~ Normal(0, gap_variance(y)); vectorized over ``y``."""
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0):
        raise DomainError("y must be >= 0")
    value = np.sqrt(gap_variance(ya, params)) * rng.standard_normal(ya.shape)
    if ya.ndim == 0:
        return GapSample(float(ya), float(value))
    return GapSample(ya, value)


def default_exit_dt(v, params):
    """Grid step with per-step std sigma sqrt(dt) <= v / 50."""
    if v <= 0:
        raise DomainError("threshold must be > 0")
    return (v / (STEPS_PER_THRESHOLD * params.sigma)) ** 2


def bridge_cross_probability(x0, x1, v, sigma, dt):
    """Probability that a Brownian bridge from x0 to x1 over dt leaves (-v, v).

    Both endpoints must lie inside the interval.  Uses the single-barrier
    formulas for the two sides and treats them as independent, which is
    accurate to far below the grid bias it removes.
    """
    c = 2.0 / (sigma * sigma * dt)
    up = np.exp(-c * (v - x0) * (v - x1))
    dn = np.exp(-c * (v + x0) * (v + x1))
    return 1.0 - (1.0 - up) * (1.0 - dn)


@dataclass
class FirstPassage:
    z: np.ndarray
    exit_value: np.ndarray
    sq_integral: np.ndarray


def first_passage(o0, v, params, dt, rng, max_duration=math.inf, bridge=True,
                  crn=False, block=256):
    """Exit of the gap process from (-v, v) for a batch of starting points.

    Paths start at ``o0`` (those already outside exit at time 0) and advance
    with exact transitions on a uniform grid.  Returns exit times, the value
    at exit and the trapezoidal integral of O^2 up to exit.

    With ``bridge`` a step whose endpoints both stay inside still exits with
    the Brownian-bridge crossing probability; the exit is then placed at the
    step midpoint on the nearer barrier.  Without it only grid points are
    checked, which overstates exit times by roughly 0.58 sigma sqrt(dt) in
    threshold terms.

    ``crn`` draws noise for every path at every step, active or not, so path
    ``j`` always consumes the same random numbers; this keeps results smooth
    in ``v`` when the same seed is reused.
    """
    o0 = np.atleast_1d(np.asarray(o0, dtype=float))
    n = o0.size
    z = np.zeros(n)
    exit_value = o0.copy()
    area = np.zeros(n)
    if v <= 0:
        return FirstPassage(z, exit_value, area)
    a = float(decay(dt, params))
    s = math.sqrt(gap_variance(dt, params))
    active = np.flatnonzero(np.abs(o0) < v)
    x = o0[active]
    elapsed = 0.0
    while active.size:
        if elapsed > max_duration:
            raise NonConvergence(
                "%d of %d paths still inside (-%g, %g) after %g time units"
                % (active.size, n, v, v, elapsed)
            )
        if crn and active.size * 16 >= n:
            noise = rng.standard_normal((n, block))[active]
        else:
            noise = rng.standard_normal((active.size, block))
        path, _ = lfilter([s], [1.0, -a], noise, axis=1, zi=(a * x)[:, None])
        absp = np.abs(path)
        crossed = absp >= v
        if bridge:
            # p < 1e-12 unless one endpoint is within ~2.6 step-stds of a barrier
            close = absp > v - _BRIDGE_BAND * s
            cand = close.copy()
            cand[:, 1:] |= close[:, :-1]
            cand[:, 0] |= np.abs(x) > v - _BRIDGE_BAND * s
            cand &= ~crossed
            cand[:, 1:] &= ~crossed[:, :-1]
            r, c = np.nonzero(cand)
            if r.size:
                x0 = np.where(c > 0, path[r, np.maximum(c - 1, 0)], x[r])
                pc = bridge_cross_probability(x0, path[r, c], v, params.sigma, dt)
                fire = rng.random(r.size) < pc
                soft = np.zeros_like(crossed)
                soft[r[fire], c[fire]] = True
                crossed |= soft
            else:
                soft = None
        else:
            soft = None
        any_hit = crossed.any(axis=1)
        k = np.where(any_hit, crossed.argmax(axis=1), block - 1)
        rows = np.arange(active.size)
        csum = np.cumsum(path * path, axis=1)
        pk = path[rows, k]
        before = np.where(k > 0, csum[rows, np.maximum(k - 1, 0)], 0.0)
        x_prev = np.where(k > 0, path[rows, np.maximum(k - 1, 0)], x)
        # area over full steps 0..k-1 (trapezoid), the last step handled below
        full = dt * (0.5 * x * x + before - 0.5 * x_prev * x_prev)
        is_soft = any_hit & soft[rows, k] if soft is not None else np.zeros(active.size, bool)
        # soft exits land on the nearer barrier, mid-step
        near = np.where(x_prev >= 0, v, -v)
        end_val = np.where(is_soft, near, pk)
        last_len = np.where(is_soft, 0.5 * dt, dt)
        last_area = 0.5 * last_len * (x_prev * x_prev + end_val * end_val)
        area[active] += full + last_area
        z[active] += dt * k + last_len
        elapsed += dt * block
        done = any_hit
        exit_value[active[done]] = end_val[done]
        x = pk[~done]
        active = active[~done]
    return FirstPassage(z, exit_value, area)


def simulate_exit_time(q, v, params, dt=None, rng=None, bridge=True, max_duration=math.inf):
    """Time for the gap process started at ``q`` to leave (-v, v).

    ``q`` may be an array.  Raises :class:`DomainError` if any ``|q| >= v``;
    the caller treats that case as an immediate exit.
    """
    qa = np.asarray(q, dtype=float)
    if v <= 0 or np.any(np.abs(qa) >= v):
        raise DomainError("start must lie strictly inside (-v, v)")
    if dt is None:
        dt = default_exit_dt(v, params)
    if dt <= 0:
        raise DomainError("dt must be > 0")
    res = first_passage(qa, v, params, dt, rng, max_duration=max_duration, bridge=bridge)
    return float(res.z[0]) if qa.ndim == 0 else res.z


def integrate_segment(o0, length, params, rng, steps=64):
    """Advance the gap process over per-path durations ``length``.

    Each path takes ``steps`` equal exact-transition steps.  Returns the end
    values and the trapezoidal integral of O^2 over the segment.
    """
    o0 = np.asarray(o0, dtype=float)
    length = np.broadcast_to(np.asarray(length, dtype=float), o0.shape)
    h = length / steps
    a = decay(h, params)
    s = np.sqrt(gap_variance(h, params))
    x = o0.copy()
    area = 0.5 * x * x
    noise = rng.standard_normal((steps,) + o0.shape)
    for k in range(steps):
        x = a * x + s * noise[k]
        area = area + (x * x if k < steps - 1 else 0.5 * x * x)
    return x, area * h


def mse_lower_bound(service, params, n=10**6, seed=0):
    """Expected error variance accrued over one service time.

        sigma^2/(2 theta) E[1 - e^{-2 theta Y}]    (theta != 0)
        sigma^2 E[Y]                                (theta == 0)

    Uses the closed-form Laplace transform where the service model has one
    and ``n`` Monte Carlo draws otherwise.  For theta < 0 with log-normal
    service the expectation is infinite; the Monte Carlo value then only
    reflects the draws seen and a warning is issued.
    """
    from . import rng as _rng

    if n < 1:
        raise DomainError("n must be >= 1")
    s2 = params.sigma**2
    if params.is_wiener:
        return s2 * service.mean
    th = params.theta
    lap = service.laplace(2.0 * th)
    if lap is not None and math.isfinite(lap):
        return s2 * (1.0 - lap) / (2.0 * th)
    if lap is not None:
        warnings.warn(
            "E[exp(-2 theta Y)] diverges for this service model; "
            "mse_Y is infinite and the Monte Carlo estimate is not meaningful",
            RuntimeWarning,
            stacklevel=2,
        )
    y = service.draw(_rng.stream(seed, _rng.SERVICE_MEAN), n)
    return float(s2 * np.mean(-np.expm1(-2.0 * th * y)) / (2.0 * th))
