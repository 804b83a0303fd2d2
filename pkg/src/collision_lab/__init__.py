"""Exact, asymptotic and simulated waiting times for the first r-collision
and r-repetition when drawing balls from an urn of coloured balls."""

__version__ = "0.1.0"

from .configuration import Configuration, MultinomialModel  # noqa: E402
from .errors import (  # noqa: E402
    CollisionLabError,
    DomainError,
    InvalidQueryError,
    NumericError,
    ResourceError,
)

__all__ = [
    "__version__",
    "Configuration",
    "MultinomialModel",
    "CollisionLabError",
    "DomainError",
    "InvalidQueryError",
    "NumericError",
    "ResourceError",
]
