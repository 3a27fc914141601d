"""Point estimates with standard errors."""

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n: int = 0

    def __float__(self):
        return float(self.value)

    @property
    def ci_halfwidth(self):
        return Z95 * self.se


def mean_estimate(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Estimate(float(np.mean(x)), se, n)


def ratio_estimate(num, den):
    """sum(num) / sum(den) with the delta-method (linearized jackknife) error.

    ``num`` and ``den`` are paired i.i.d. observations, e.g. per-cycle error
    integrals and durations, or per-trajectory totals.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    r = float(num.sum() / den.sum())
    if n < 2:
        return Estimate(r, math.inf, n)
    resid = num - r * den
    se = float(np.sqrt(np.sum(resid**2) / (n * (n - 1))) / np.mean(den))
    return Estimate(r, se, n)


def combined_se(*ses):
    return math.sqrt(sum(s * s for s in ses))
