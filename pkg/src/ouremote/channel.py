"""Service-time models, additive sample noise and the FCFS channel."""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OrderViolation

SERVICE_KINDS = ("constant", "exponential", "gamma", "lognormal")


@dataclass(frozen=True)
class ServiceModel:
    """I.i.d. service-time distribution.

    ``param`` is the constant value, the exponential mean, the gamma shape or
    the log-normal scale ``alpha``; ``scale`` is only used by the gamma kind.
    The log-normal kind is normalized to unit mean: Y = e^{alpha X} / e^{alpha^2/2}.
    """

    kind: str
    param: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise DomainError("unknown service kind %r" % (self.kind,))
        if not (self.param > 0 and math.isfinite(self.param)):
            raise DomainError("service parameter must be finite and > 0")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError("service scale must be finite and > 0")

    @classmethod
    def constant(cls, c):
        return cls("constant", c)

    @classmethod
    def exponential(cls, mean):
        return cls("exponential", mean)

    @classmethod
    def gamma(cls, shape, scale):
        return cls("gamma", shape, scale)

    @classmethod
    def lognormal(cls, alpha):
        return cls("lognormal", alpha)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind")
        if kind == "constant":
            return cls.constant(d.pop("c", 1.0))
        if kind == "exponential":
            return cls.exponential(d.pop("mean", 1.0))
        if kind == "gamma":
            return cls.gamma(d.pop("shape"), d.pop("scale", 1.0))
        if kind == "lognormal":
            return cls.lognormal(d.pop("alpha"))
        raise DomainError("unknown service kind %r" % (kind,))

    def to_dict(self):
        key = {"constant": "c", "exponential": "mean", "lognormal": "alpha"}
        if self.kind == "gamma":
            return {"kind": "gamma", "shape": self.param, "scale": self.scale}
        return {"kind": self.kind, key[self.kind]: self.param}

    @property
    def mean(self):
        if self.kind == "gamma":
            return self.param * self.scale
        if self.kind == "lognormal":
            return 1.0
        return self.param

    def draw(self, rng, size=None):
        if self.kind == "constant":
            return self.param if size is None else np.full(size, float(self.param))
        if self.kind == "exponential":
            return rng.exponential(self.param, size)
        if self.kind == "gamma":
            return rng.gamma(self.param, self.scale, size)
        a = self.param
        return np.exp(a * rng.standard_normal(size) - 0.5 * a * a)

    def laplace(self, s):
        """E[e^{-s Y}] in closed form, or None when there is none.

        Returns ``inf`` where the expectation diverges (s < 0 with a
        log-normal tail, or beyond the exponential/gamma abscissa).
        """
        if self.kind == "constant":
            return math.exp(-s * self.param)
        if self.kind in ("exponential", "gamma"):
            shape, scale = (1.0, self.param) if self.kind == "exponential" else (self.param, self.scale)
            base = 1.0 + s * scale
            return math.inf if base <= 0 else base ** (-shape)
        if s < 0:
            return math.inf
        return None


def draw_service(service, rng, size=None):
    """One (or ``size``) positive service-time draws."""
    return service.draw(rng, size)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian sampler noise (variance b1) and channel noise (b2)."""

    b1: float = 0.0
    b2: float = 0.0
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise DomainError("only gaussian noise is implemented")
        for b in (self.b1, self.b2):
            if not (b >= 0 and math.isfinite(b)):
                raise DomainError("noise variances must be finite and >= 0")

    @property
    def total_variance(self):
        """E[(N + N')^2] = b1 + b2 for independent zero-mean noises."""
        return self.b1 + self.b2

    @property
    def is_noiseless(self):
        return self.b1 == 0 and self.b2 == 0


def corrupt(x, noise, rng):
    """Received value x + N + N'.

    Both noises are always drawn so a noiseless run consumes the noise stream
    exactly like a noisy one; with b1 = b2 = 0 the result is x exactly.
    """
    xa = np.asarray(x, dtype=float)
    n1 = rng.standard_normal(xa.shape)
    n2 = rng.standard_normal(xa.shape)
    out = xa + math.sqrt(noise.b1) * n1 + math.sqrt(noise.b2) * n2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SamplePacket:
    s: float
    x: float
    q: float
    d: float
    y: float


class FcfsChannel:
    """Single-server FIFO channel with instantaneous acknowledgements.

    Delivery times follow D_i = max(S_i, D_{i-1}) + Y_i.  The channel is
    created with the initial packet S_0 = 0, D_0 = Y_0 already in service.
    """

    def __init__(self, x0, q0, y0):
        if not y0 > 0:
            raise DomainError("initial service time must be > 0")
        first = SamplePacket(0.0, x0, q0, y0, y0)
        self._queue = deque([first])
        self._last_s = 0.0
        self._last_d = y0
        self.submitted = [first]

    def idle(self, t):
        """I_t == 0: every submitted packet has been delivered by time t."""
        return t >= self._last_d

    @property
    def last_delivery(self):
        return self._last_d

    def submit(self, s, x, q, y):
        if s < self._last_s:
            raise OrderViolation("submission at %g precedes previous one at %g" % (s, self._last_s))
        if not y > 0:
            raise DomainError("service time must be > 0")
        d = max(s, self._last_d) + y
        pkt = SamplePacket(s, x, q, d, y)
        self._queue.append(pkt)
        self.submitted.append(pkt)
        self._last_s = s
        self._last_d = d
        return pkt

    def deliveries_until(self, t):
        """Pop and return packets delivered at or before time t, in order."""
        out = []
        while self._queue and self._queue[0].d <= t:
            out.append(self._queue.popleft())
        return out

    def next_delivery(self):
        return self._queue[0].d if self._queue else math.inf
