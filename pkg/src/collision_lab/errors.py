"""Exception hierarchy shared by all modules."""


class CollisionLabError(Exception):
    """Base class for library errors."""


class DomainError(CollisionLabError, ValueError):
    """An argument lies outside the domain of the function."""


class InvalidQueryError(CollisionLabError, ValueError):
    """The requested waiting time is infinite for this configuration."""


class ResourceError(CollisionLabError, RuntimeError):
    """An exact or exhaustive computation would exceed its configured guard."""


class NumericError(CollisionLabError, ArithmeticError):
    """Numerical integration failed to reach the requested tolerance.

    The best available estimate and its error bound are kept on the exception.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
