"""Exception types shared across the package."""


class HypMNNRError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(HypMNNRError, ValueError):
    pass


class DegeneratePairError(InvalidArgumentError):
    """Two atoms coincide (same position and same mark), so R = 0."""


class UnsupportedOperationError(HypMNNRError, TypeError):
    pass


class NonConvergenceError(HypMNNRError, RuntimeError):
    """A numerical procedure stopped before meeting its tolerance.

    The best available estimate is kept on ``estimate`` (and ``error`` when
    an error bound is known) so callers can still inspect it.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
