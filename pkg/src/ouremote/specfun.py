"""Scalar special functions used by the threshold formulas.

``G`` and ``K`` are the two auxiliary functions

    G(x) = sqrt(pi)/2 * exp(x**2) * erf(x) / x
    K(x) = sqrt(pi)/2 * exp(-x**2) * erfi(x) / x

with G(0) = K(0) = 1.  G increases from 1 to infinity, K decreases from 1
to 0, so both have well defined inverses on [1, inf) and (0, 1].

Kummer's function M(1, 1/2, z) follows from them through

    M(1, 1/2, x**2)  = 1 + 2 x**2 G(x)
    M(1, 1/2, -x**2) = 1 - 2 x**2 K(x)

All functions accept scalars or arrays and return the same shape.
"""

import math

import numpy as np
from scipy import special

from .errors import DomainError, DomainOverflow

_SMALL = 1e-4
_SQRT_PI_2 = math.sqrt(math.pi) / 2.0
KUMMER_MAX = 650.0
ERFI_MAX = 26.0


def _out(x, value):
    return float(value) if np.ndim(x) == 0 else value


def erf(x):
    """Error function."""
    return _out(x, special.erf(np.asarray(x, dtype=float)))


def erfi(x):
    """Imaginary error function, ``-i erf(i x)``.

    Raises :class:`DomainOverflow` for ``|x| > 26``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > ERFI_MAX):
        raise DomainOverflow("erfi argument beyond +-%g overflows" % ERFI_MAX)
    return _out(x, special.erfi(xa))


def _check_nonneg(xa, name):
    if np.any(~np.isfinite(xa)) or np.any(xa < 0):
        raise DomainError("%s requires finite x >= 0" % name)


def g_func(x):
    """G(x) for x >= 0, strictly increasing from G(0) = 1."""
    xa = np.asarray(x, dtype=float)
    _check_nonneg(xa, "g_func")
    small = xa < _SMALL
    safe = np.where(small, 1.0, xa)
    with np.errstate(over="ignore"):
        big = _SQRT_PI_2 * np.exp(safe * safe) * special.erf(safe) / safe
    x2 = xa * xa
    out = np.where(small, 1.0 + x2 * (2.0 / 3.0 + x2 * (4.0 / 15.0)), big)
    if not np.all(np.isfinite(out)):
        raise DomainOverflow("g_func overflows: exp(x**2) not representable")
    return _out(x, out)


def k_func(x):
    """K(x) for x >= 0, strictly decreasing from K(0) = 1 towards 0.

    Evaluated as Dawson's integral over x, which carries the exp(-x**2)
    prefactor internally and cannot overflow.
    """
    xa = np.asarray(x, dtype=float)
    _check_nonneg(xa, "k_func")
    small = xa < _SMALL
    safe = np.where(small, 1.0, xa)
    big = special.dawsn(safe) / safe
    x2 = xa * xa
    out = np.where(small, 1.0 - x2 * (2.0 / 3.0 - x2 * (4.0 / 15.0)), big)
    return _out(x, out)


def _g_prime(x):
    if x < _SMALL:
        return 4.0 * x / 3.0
    g = g_func(x)
    return 2.0 * x * g + (1.0 - g) / x


def _k_prime(x):
    if x < _SMALL:
        return -4.0 * x / 3.0
    k = k_func(x)
    return -2.0 * x * k + (1.0 - k) / x


def _invert(f, fprime, y, increasing, width=1e-12, polish=2):
    # bracket [lo, hi] with f(lo), f(hi) on opposite sides of y
    lo, hi = 0.0, 1.0
    if increasing:
        while f(hi) < y:
            lo, hi = hi, 2.0 * hi
    else:
        while f(hi) > y:
            lo, hi = hi, 2.0 * hi
    while hi - lo > width * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if (f(mid) < y) == increasing:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(polish):
        d = fprime(x)
        if d == 0.0:
            break
        step = (f(x) - y) / d
        # Newton must stay inside the bisection bracket
        if lo <= x - step <= hi:
            x -= step
    return x


def g_inv(y):
    """Inverse of :func:`g_func` on [1, inf)."""
    y = float(y)
    if not y >= 1.0 or not math.isfinite(y):
        raise DomainError("g_inv requires finite y >= 1, got %r" % y)
    if y == 1.0:
        return 0.0
    return _invert(g_func, _g_prime, y, increasing=True)


def k_inv(y):
    """Inverse of :func:`k_func` on (0, 1]."""
    y = float(y)
    if not 0.0 < y <= 1.0:
        raise DomainError("k_inv requires 0 < y <= 1, got %r" % y)
    if y == 1.0:
        return 0.0
    return _invert(k_func, _k_prime, y, increasing=False)


def kummer_1f1_1_half(z):
    """Confluent hypergeometric function M(1, 1/2, z) for |z| <= 650."""
    za = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(za)) or np.any(np.abs(za) > KUMMER_MAX):
        raise DomainOverflow("kummer_1f1_1_half requires |z| <= %g" % KUMMER_MAX)
    root = np.sqrt(np.abs(za))
    pos = 1.0 + 2.0 * np.abs(za) * np.asarray(g_func(np.where(za >= 0, root, 0.0)))
    neg = 1.0 - 2.0 * np.abs(za) * np.asarray(k_func(np.where(za < 0, root, 0.0)))
    return _out(z, np.where(za >= 0, pos, neg))
