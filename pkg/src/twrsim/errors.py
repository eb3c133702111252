"""Exception types raised across the package."""


class DegenerateInterval(ZeroDivisionError, ValueError):
    """A time interval used as a divisor is zero or non-positive."""


class SingularInformation(ArithmeticError):
    """The Fisher information matrix is too ill-conditioned to invert."""


class NoPositiveRoot(ArithmeticError):
    """The optimality cubic has no positive real root."""


class ZeroMeasurements(ValueError):
    """A session is shorter than a single ranging transaction."""
