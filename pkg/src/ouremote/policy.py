"""Sampling policies: the optimal threshold rule and two signal-ignorant baselines.

Every policy here waits for the channel to be idle before sampling, so at
most one packet is ever in flight.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import DomainError


def threshold_v(beta, params, mse_y):
    """Threshold on |X_t - X_hat_t| for a candidate optimal MSE ``beta``.

    stable:    sigma/sqrt(theta)  * G^{-1}((c - mse_y) / (c - beta))
    Wiener:    sqrt(3 (beta - mse_y))
    unstable:  sigma/sqrt(-theta) * K^{-1}((c - mse_y) / (c - beta))

    with c = sigma^2 / (2 theta).  The Wiener branch is written with mse_y,
    which equals sigma^2 E[Y]; for sigma = 1 that is the familiar
    sqrt(3 (beta - E[Y])).
    """
    beta = float(beta)
    mse_y = float(mse_y)
    if not beta >= mse_y:
        raise DomainError("beta=%g below the lower bound mse_y=%g" % (beta, mse_y))
    if params.is_wiener:
        return math.sqrt(3.0 * (beta - mse_y))
    c = params.sigma**2 / (2.0 * params.theta)
    if params.theta > 0 and not beta < c:
        raise DomainError("beta=%g must stay below sigma^2/(2 theta)=%g" % (beta, c))
    ratio = (c - mse_y) / (c - beta)
    scale = params.sigma / math.sqrt(abs(params.theta))
    if params.theta > 0:
        return scale * specfun.g_inv(max(ratio, 1.0))
    return scale * specfun.k_inv(min(ratio, 1.0))


@dataclass(frozen=True)
class ThresholdSpec:
    beta: float
    v: float

    @classmethod
    def from_beta(cls, beta, params, mse_y):
        return cls(float(beta), threshold_v(beta, params, mse_y))


@dataclass(frozen=True)
class OptimalThreshold:
    v: float
    beta: float = math.nan

    def __post_init__(self):
        if not (self.v >= 0 and math.isfinite(self.v)):
            raise DomainError("threshold must be finite and >= 0")

    @classmethod
    def from_spec(cls, spec):
        return cls(spec.v, spec.beta)

    @property
    def name(self):
        return "threshold(v=%.6g)" % self.v


@dataclass(frozen=True)
class ZeroWait:
    @property
    def name(self):
        return "zero-wait"


@dataclass(frozen=True)
class Periodic:
    """Sample every ``period`` time units, deferred while the channel is busy.

    The next sample is taken at max(S_i + period, D_i).
    """

    period: float

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise DomainError("period must be > 0")

    @property
    def name(self):
        return "periodic(T=%.6g)" % self.period


def decide_sample(t, signal, estimate, idle, policy, last_sample=0.0):
    """Whether to take a sample now.  Vectorized over ``t``/``signal``/``estimate``.

    The threshold comparison is closed: an error of exactly ``v`` fires.
    """
    idle = np.asarray(idle, dtype=bool)
    if isinstance(policy, OptimalThreshold):
        err = np.abs(np.asarray(signal, dtype=float) - np.asarray(estimate, dtype=float))
        out = idle & (err >= policy.v)
    elif isinstance(policy, ZeroWait):
        out = idle & np.ones(np.shape(signal), dtype=bool)
    elif isinstance(policy, Periodic):
        out = idle & (np.asarray(t, dtype=float) >= last_sample + policy.period)
    else:
        raise TypeError("unknown policy %r" % (policy,))
    return bool(out) if out.ndim == 0 else out
