"""Exception types shared across the package."""


class GroupValidationError(ValueError):
    """A group specification violates a structural requirement."""


class DegenerateFrameError(RuntimeError):
    """A frequency sits outside the generic (full-rank) stratum.

    Carries the observed rank so the caller can decide how to proceed.
    """

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank


class UnsupportedOperationError(RuntimeError):
    """The requested operation needs a capability the object does not have."""


class AccuracyError(RuntimeError):
    """A quadrature failed its internal convergence check."""
