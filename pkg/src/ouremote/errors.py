"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class DomainOverflow(OverflowError):
    """Argument so large that an exponential prefactor overflows a double."""


class OrderViolation(ValueError):
    """Channel submissions arrived with decreasing timestamps."""


class StaleState(ValueError):
    """Estimator queried at a time before its latest delivery."""


class NonConvergence(RuntimeError):
    """A simulated cycle exceeded the configured maximum duration."""


class BracketFailure(RuntimeError):
    """Root bracketing found no sign change of the residual.

    Both endpoint residuals are kept on the exception for reporting.
    """

    def __init__(self, message, lo=None, hi=None, residual_lo=None, residual_hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.residual_lo = residual_lo
        self.residual_hi = residual_hi
