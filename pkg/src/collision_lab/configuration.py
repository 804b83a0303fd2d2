"""Preimage configurations and multinomial random-mapping models."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError, InvalidQueryError

__all__ = ["Configuration", "MultinomialModel", "check_order", "parse_rational"]


def check_order(r) -> int:
    """Validate a collision order ``r`` (an integer >= 2)."""
    if isinstance(r, bool) or int(r) != r or r < 2:
        raise DomainError(f"collision order must be an integer >= 2, got {r!r}")
    return int(r)


def parse_rational(value) -> Fraction:
    """Parse ``"a/b"`` strings, ints and Fractions into an exact Fraction.

    Floats are rejected on purpose: probabilities must stay exact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip().replace(",", "."))
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(f"not a rational number: {value!r}") from exc
    raise DomainError(f"expected an exact rational (int, Fraction or 'a/b'), got {value!r}")


@dataclass(frozen=True)
class Configuration:
    """Preimage sizes ``(x_1, ..., x_m)`` of an (n, m)-function.

    ``x_i`` is the number of balls of colour ``i`` in the urn; ``n`` is the
    total number of balls and ``m`` the number of colours (zeros allowed).
    """

    sizes: tuple[int, ...]
    n: int = field(init=False, repr=False, compare=False)
    m: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(self.sizes)
        for x in sizes:
            if isinstance(x, bool) or int(x) != x or x < 0:
                raise DomainError(f"preimage sizes must be nonnegative integers, got {x!r}")
        sizes = tuple(int(x) for x in sizes)
        if not sizes:
            raise DomainError("a configuration needs at least one image point (m >= 1)")
        n = sum(sizes)
        if n < 1:
            raise DomainError("a configuration needs at least one ball (n >= 1)")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", len(sizes))

    @classmethod
    def classical(cls, m: int) -> "Configuration":
        """The classical birthday configuration: ``m`` cells of size one."""
        return cls((1,) * int(m))

    @classmethod
    def from_values(cls, values: Iterable, codomain: Sequence | None = None) -> "Configuration":
        """Configuration of the mapping whose value table is ``values``.

        ``values`` lists ``h(d)`` for every domain point ``d``.  When
        ``codomain`` is given, images that are never hit become zero entries.
        """
        counts = Counter(values)
        if codomain is None:
            return cls(tuple(counts[v] for v in sorted(counts, key=repr)))
        extra = set(counts) - set(codomain)
        if extra:
            raise DomainError(f"values outside the codomain: {sorted(extra, key=repr)[:5]}")
        return cls(tuple(counts[v] for v in codomain))

    def counts(self) -> Counter:
        """Multiplicity of each distinct positive preimage size."""
        return Counter(x for x in self.sizes if x > 0)

    def max_size(self) -> int:
        return max(self.sizes)

    def occupied(self) -> int:
        """Number of image points with a nonempty preimage (``b``)."""
        return sum(1 for x in self.sizes if x > 0)

    def require_collisions(self, r: int) -> None:
        """Raise unless some preimage has at least ``r`` points."""
        if self.max_size() < r:
            raise InvalidQueryError(
                f"no preimage has {r} or more points: the first {r}-collision never occurs"
            )

    def __str__(self):
        return ",".join(map(str, self.sizes))


@dataclass(frozen=True)
class MultinomialModel:
    """Random configuration with Multinomial(n; p_1, ..., p_m) preimage sizes."""

    n: int
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        probs = tuple(parse_rational(p) for p in self.probs)
        if not probs:
            raise DomainError("a multinomial model needs at least one cell")
        if any(p < 0 for p in probs):
            raise DomainError("cell probabilities must be nonnegative")
        if sum(probs) != 1:
            raise DomainError(f"cell probabilities must sum to exactly 1, got {sum(probs)}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "probs", probs)

    @property
    def m(self) -> int:
        return len(self.probs)

    @classmethod
    def uniform(cls, n: int, m: int) -> "MultinomialModel":
        return cls(n, (Fraction(1, m),) * m)

    @classmethod
    def from_configuration(cls, config: Configuration) -> "MultinomialModel":
        """Model with ``p_i = x_i / n`` for the given fixed configuration."""
        return cls(config.n, tuple(Fraction(x, config.n) for x in config.sizes))
