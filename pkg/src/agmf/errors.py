"""Exception types shared across the library."""


class FilterError(Exception):
    """Base class for all library errors."""


class InvalidInputError(FilterError, ValueError):
    """Raised when arguments violate a documented precondition."""


class NumericalError(FilterError, ArithmeticError):
    """Raised when a computation is numerically unsafe (singular or
    indefinite matrices, conditioning beyond repair)."""


class EvaluationError(FilterError):
    """Raised when a user-supplied transform returns non-finite values.

    Carries the offending input point so the caller can locate the bad
    region of the transform.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class DegenerateUpdateError(FilterError):
    """Raised when a measurement update cannot proceed because every
    component likelihood underflowed."""
