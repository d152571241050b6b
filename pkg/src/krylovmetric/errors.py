"""Exception types shared across the package."""


class KrylovMetricError(Exception):
    """Base class for all package errors."""


class ParameterError(KrylovMetricError, ValueError):
    """A parameter violates a precondition (bad range, vanishing Pochhammer, ...)."""


class PrecisionExhaustedError(KrylovMetricError):
    """A computation lost all significant bits at the requested precision.

    Carries the failing recursion index and a suggested bit budget that
    should be enough to get past it.
    """

    def __init__(self, message, n=None, suggested_bits=None):
        super().__init__(message)
        self.n = n
        self.suggested_bits = suggested_bits


class ConvergenceError(KrylovMetricError):
    """An iterative scheme failed to reach the target residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularContourError(KrylovMetricError):
    """The contour integrand overflowed on the sample grid."""


class TruncationError(KrylovMetricError):
    """A truncated expansion cannot meet the requested tolerance.

    ``tail_estimate`` is the bound on the neglected part.
    """

    def __init__(self, message, tail_estimate=None):
        super().__init__(message)
        self.tail_estimate = tail_estimate


class TruncationWarning(UserWarning):
    """Non-fatal: chain truncation tail mass exceeded the tolerance."""


class StokesProximityWarning(UserWarning):
    """Two saddle branches have nearly equal Re S; dominance is marginal."""
