"""Exact survival probabilities of the three waiting times.

``K1`` is the first r-collision when drawing without replacement, ``K2`` the
first r-collision when drawing with replacement (r distinct balls of one
colour) and ``R`` the first r-repetition with replacement (a colour drawn r
times).  All survival probabilities ``P(T > k)`` are coefficient extractions
from products of small polynomials:

* ``P(K1 > k) = [t^k] prod p_r(x_i, t) / C(n, k)``
* ``P(R > k)  = k! / n^k [t^k] prod q_r(x_i t)``
* ``P(K2 > k) = sum_d P(K1 > d) P(I(k, n) = d)`` with ``I`` the image size of
  a uniform random map ``[k] -> [n]``.

Products are formed over distinct preimage sizes with integer coefficients,
so the exact path never touches a denominator until the final ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Iterator

import numpy as np
from scipy import special

from .configuration import Configuration, MultinomialModel, check_order
from .errors import DomainError, InvalidQueryError, ResourceError
from .kernels import (
    falling_factorial,
    image_cardinality_pmf,
    log_q_r,
    p_r_poly,
    poly_pow,
    poly_product,
    q_r_poly,
)
from .quadrature import integrate_half_line

__all__ = [
    "EXACT_MAX_N",
    "MAX_TABLE_LENGTH",
    "MODES",
    "SurvivalTable",
    "CollisionCounts",
    "TrueCollisionReport",
    "collision_coefficients",
    "repetition_coefficients",
    "survival",
    "survival_K1",
    "survival_K2",
    "survival_K2_surjection",
    "survival_R",
    "survival_K1_multinomial",
    "survival_K2_multinomial",
    "survival_table",
    "iter_survival_K2",
    "expected_collision_counts",
    "prob_true_collision_first",
]

#: Configurations with more balls than this are evaluated in floating point.
EXACT_MAX_N = 10_000
MAX_TABLE_LENGTH = 1_000_000

MODES = ("K1", "K2", "R")


def _use_exact(n: int, exact: bool | None) -> bool:
    return n <= EXACT_MAX_N if exact is None else bool(exact)


def _check_mode(mode: str) -> str:
    mode = str(mode).upper()
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def _check_k(k) -> int:
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class SurvivalTable:
    """``P(T > k)`` for ``k = 0, 1, ..., len(entries) - 1``."""

    mode: str
    r: int
    entries: tuple
    exact: bool

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def as_floats(self) -> np.ndarray:
        return np.array([float(p) for p in self.entries])

    def rows(self):
        return list(enumerate(self.entries))


# --------------------------------------------------------------------------
# generating polynomials
# --------------------------------------------------------------------------

def _groups(config: Configuration) -> tuple:
    return tuple(sorted(config.counts().items()))


@lru_cache(maxsize=256)
def _collision_coeffs(groups: tuple, r: int) -> tuple:
    # cells smaller than r contribute (1 + t)^x; they are merged into one power
    small = sum(x * mult for x, mult in groups if x < r)
    factors = [([1, 1], small)]
    factors += [(p_r_poly(x, r), mult) for x, mult in groups if x >= r]
    return tuple(poly_product(factors))


@lru_cache(maxsize=256)
def _repetition_coeffs(groups: tuple, r: int) -> tuple:
    factors = [(q_r_poly(x, r, scaled=True), mult) for x, mult in groups]
    return tuple(poly_product(factors))


def collision_coefficients(config: Configuration, r: int) -> list[int]:
    """Integer coefficients of ``prod_i p_r(x_i, t)``."""
    return list(_collision_coeffs(_groups(config), check_order(r)))


def repetition_coefficients(config: Configuration, r: int) -> tuple[list[int], int]:
    """Coefficients of ``prod_i (r-1)! q_r(x_i t)`` and the scale ``(r-1)!^b``.

    ``b`` is the number of occupied cells; dividing by the scale recovers
    ``prod_i q_r(x_i t)``.
    """
    r = check_order(r)
    return list(_repetition_coeffs(_groups(config), r)), factorial(r - 1) ** config.occupied()


def _log_int(v: int) -> float:
    return math.log(v) if v > 0 else -math.inf


# --------------------------------------------------------------------------
# log-domain coefficients for the float path
# --------------------------------------------------------------------------

def _log_binomial_row(e: int) -> np.ndarray:
    k = np.arange(e + 1, dtype=float)
    return special.gammaln(e + 1) - special.gammaln(k + 1) - special.gammaln(e - k + 1)


def _log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) > len(b):
        a, b = b, a
    out = np.full(len(a) + len(b) - 1, -np.inf)
    for j, aj in enumerate(a):
        if aj > -np.inf:
            seg = out[j:j + len(b)]
            out[j:j + len(b)] = np.logaddexp(seg, aj + b)
    return out


def _log_power(base: list, mult: int, shift: float = 0.0) -> np.ndarray:
    """log coefficients of ``base ** mult`` minus ``mult * shift``."""
    if len(base) == 2:
        # (b0 + b1 t)^e has binomial coefficients
        b0, b1 = base
        k = np.arange(mult + 1, dtype=float)
        return _log_binomial_row(mult) + (mult - k) * math.log(b0) + k * math.log(b1) - mult * shift
    return np.array([_log_int(c) for c in poly_pow(base, mult)]) - mult * shift


@lru_cache(maxsize=64)
def _log_coeffs(groups: tuple, r: int, kind: str) -> np.ndarray:
    """log of the coefficients of ``prod p_r(x_i, t)`` (kind ``"K"``) or of
    ``prod q_r(x_i t)`` (kind ``"R"``), computed without big integers when
    every factor is linear."""
    if kind == "K":
        small = sum(x * mult for x, mult in groups if x < r)
        parts = [_log_power([1, 1], small)] if small else []
        parts += [_log_power(p_r_poly(x, r), mult) for x, mult in groups if x >= r]
    else:
        shift = math.lgamma(r)
        parts = [_log_power(q_r_poly(x, r, scaled=True), mult, shift) for x, mult in groups]
    parts.sort(key=len)
    out = np.zeros(1)
    for part in parts:
        out = _log_convolve(out, part)
    return out


# --------------------------------------------------------------------------
# single survival values
# --------------------------------------------------------------------------

def survival_K1(config: Configuration, r: int, k: int, exact: bool | None = None):
    """``P(K1 > k)``: no r distinct balls of one colour among ``k`` drawn without replacement."""
    r, k = check_order(r), _check_k(k)
    config.require_collisions(r)
    n = config.n
    if not _use_exact(n, exact):
        lc = _log_coeffs(_groups(config), r, "K")
        if k > n or k >= len(lc):
            return 0.0
        return min(1.0, math.exp(lc[k] - math.lgamma(n + 1) + math.lgamma(k + 1) + math.lgamma(n - k + 1)))
    c = _collision_coeffs(_groups(config), r)
    if k > n or k >= len(c):
        return Fraction(0)
    return Fraction(c[k], comb(n, k))


def survival_R(config: Configuration, r: int, k: int, exact: bool | None = None):
    """``P(R > k)``: no colour drawn ``r`` times in ``k`` draws with replacement."""
    r, k = check_order(r), _check_k(k)
    n = config.n
    if not _use_exact(n, exact):
        lc = _log_coeffs(_groups(config), r, "R")
        if k >= len(lc):
            return 0.0
        return min(1.0, math.exp(lc[k] + math.lgamma(k + 1) - k * math.log(n)))
    c, scale = repetition_coefficients(config, r)
    if k >= len(c):
        return Fraction(0)
    return Fraction(factorial(k) * c[k], scale * n**k)


def survival_K2(config: Configuration, r: int, k: int):
    """``P(K2 > k)`` as a mixture of ``P(K1 > d)`` over the number ``d`` of
    distinct balls seen in ``k`` draws with replacement."""
    r, k = check_order(r), _check_k(k)
    config.require_collisions(r)
    pmf = image_cardinality_pmf(k, config.n)
    return sum((survival_K1(config, r, d, exact=True) * p for d, p in enumerate(pmf) if p),
               Fraction(0))


def survival_K2_surjection(config: Configuration, r: int, k: int) -> Fraction:
    """``P(K2 > k) = n^-k sum_d Sur(k, d) [t^d] prod p_r(x_i, t)``.

    Independent route to :func:`survival_K2` via the surjection numbers.
    """
    from .kernels import surjection_count

    r, k = check_order(r), _check_k(k)
    config.require_collisions(r)
    c = _collision_coeffs(_groups(config), r)
    num = sum(c[d] * surjection_count(k, d) for d in range(min(k, len(c) - 1) + 1))
    return Fraction(num, config.n**k)


def survival(config: Configuration, r: int, mode: str, k: int, exact: bool | None = None):
    mode = _check_mode(mode)
    if mode == "K1":
        return survival_K1(config, r, k, exact)
    if mode == "R":
        return survival_R(config, r, k, exact)
    if _use_exact(config.n, exact):
        return survival_K2(config, r, k)
    return survival_table(config, r, "K2", k_max=_check_k(k), exact=False)[k]


# --------------------------------------------------------------------------
# whole tables
# --------------------------------------------------------------------------

def _float_survival_K1(config: Configuration, r: int) -> np.ndarray:
    lc = _log_coeffs(_groups(config), r, "K")
    n = config.n
    k = np.arange(len(lc), dtype=float)
    logs = lc - special.gammaln(n + 1) + special.gammaln(k + 1) + special.gammaln(n - k + 1)
    return np.minimum(np.exp(logs), 1.0)


def _float_survival_R(config: Configuration, r: int) -> np.ndarray:
    lc = _log_coeffs(_groups(config), r, "R")
    k = np.arange(len(lc), dtype=float)
    return np.minimum(np.exp(lc + special.gammaln(k + 1) - k * math.log(config.n)), 1.0)


def iter_survival_K2(config: Configuration, r: int, exact: bool | None = None) -> Iterator:
    """Yield ``P(K2 > k)`` for ``k = 0, 1, 2, ...`` without end.

    The exact path keeps integer surjection rows ``Sur(k, d)`` and uses
    ``Sur(k+1, d) = d (Sur(k, d) + Sur(k, d-1))``.  The float path runs the
    image-size Markov chain ``d -> d`` (prob ``d/n``), ``d -> d+1``.
    """
    r = check_order(r)
    config.require_collisions(r)
    n = config.n
    if _use_exact(n, exact):
        c = _collision_coeffs(_groups(config), r)
        top = len(c) - 1
        sur = [1] + [0] * top
        power = 1
        while True:
            yield Fraction(sum(ci * si for ci, si in zip(c, sur)), power)
            for d in range(top, 0, -1):
                sur[d] = d * (sur[d] + sur[d - 1])
            sur[0] = 0
            power *= n
    s1 = _float_survival_K1(config, r)
    d = np.arange(len(s1), dtype=float)
    stay = d / n
    move = (n - d) / n
    pi = np.zeros(len(s1))
    pi[0] = 1.0
    while True:
        yield float(pi @ s1)
        new = pi * stay
        new[1:] += pi[:-1] * move[:-1]
        pi = new


def survival_table(config: Configuration, r: int, mode: str, k_max: int | None = None,
                   exact: bool | None = None) -> SurvivalTable:
    """``P(T > k)`` for ``k = 0..k_max``.

    Default ``k_max`` is the last ``k`` with positive probability plus one for
    ``K1`` and ``R``, and ``3 n`` for ``K2`` (whose support is unbounded).
    """
    r, mode = check_order(r), _check_mode(mode)
    n = config.n
    if k_max is not None and _check_k(k_max) >= MAX_TABLE_LENGTH:
        raise ResourceError(f"k_max = {k_max} exceeds the table limit {MAX_TABLE_LENGTH - 1}")
    use_exact = _use_exact(n, exact)
    if mode == "K2":
        k_max = 3 * n if k_max is None else _check_k(k_max)
        it = iter_survival_K2(config, r, exact=use_exact)
        out = [next(it) for _ in range(k_max + 1)]
        return SurvivalTable(mode=mode, r=r, entries=tuple(out), exact=use_exact)
    if mode == "K1":
        config.require_collisions(r)
    if not use_exact:
        vals = _float_survival_K1(config, r) if mode == "K1" else _float_survival_R(config, r)
        k_max = len(vals) if k_max is None else _check_k(k_max)
        out = [float(v) for v in vals[:k_max + 1]]
        out += [0.0] * (k_max + 1 - len(out))
        return SurvivalTable(mode=mode, r=r, entries=tuple(out), exact=False)
    out = []
    if mode == "K1":
        c = _collision_coeffs(_groups(config), r)
        k_max = len(c) if k_max is None else _check_k(k_max)
        binom = 1
        for k in range(min(k_max, len(c) - 1) + 1):
            out.append(Fraction(c[k], binom))
            binom = binom * (n - k) // (k + 1)
    else:
        c, scale = repetition_coefficients(config, r)
        k_max = len(c) if k_max is None else _check_k(k_max)
        fact, den = 1, scale
        for k in range(min(k_max, len(c) - 1) + 1):
            if k:
                fact *= k
                den *= n
            out.append(Fraction(fact * c[k], den))
    out += [Fraction(0)] * (k_max + 1 - len(out))
    return SurvivalTable(mode=mode, r=r, entries=tuple(out), exact=True)


# --------------------------------------------------------------------------
# multinomial random configurations
# --------------------------------------------------------------------------

def _multinomial_check(model: MultinomialModel, r: int, k: int):
    r, k = check_order(r), _check_k(k)
    if k > model.n:
        raise DomainError(f"the multinomial formula holds for k <= n = {model.n}; got k = {k}")
    if model.n < r:
        raise InvalidQueryError(f"with n = {model.n} < r no cell can hold {r} balls")
    return r, k


def survival_K1_multinomial(model: MultinomialModel, r: int, k: int) -> Fraction:
    """``P(K1 > k) = k! [t^k] prod q_r(p_i t)`` for ``k <= n``."""
    r, k = _multinomial_check(model, r, k)
    den = math.lcm(*(p.denominator for p in model.probs))
    weights = [p.numerator * (den // p.denominator) for p in model.probs]
    # q_r(p t) = q_r(a u) with u = t / den
    proxy = Configuration(tuple(weights))
    c, scale = repetition_coefficients(proxy, r)
    if k >= len(c):
        return Fraction(0)
    return Fraction(factorial(k) * c[k], scale * den**k)


def survival_K2_multinomial(model: MultinomialModel, r: int, k: int) -> Fraction:
    """``P(K2 > k)`` for a multinomial configuration, via the image-size mixture."""
    r = check_order(r)
    k = _check_k(k)
    if model.n < r:
        raise InvalidQueryError(f"with n = {model.n} < r no cell can hold {r} balls")
    pmf = image_cardinality_pmf(k, model.n)
    return sum((survival_K1_multinomial(model, r, d) * p for d, p in enumerate(pmf) if p),
               Fraction(0))


# --------------------------------------------------------------------------
# expected collision counts at time k
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CollisionCounts:
    """Expected numbers of r-collisions after ``k`` draws.

    ``ES1``: r-sets of distinct balls sharing a colour, without replacement.
    ``EC``: colour r-multisets, with replacement (repetitions).
    ``ES2``: r-sets of distinct balls seen, with replacement.
    ``ES2multi``: as ``ES2`` but counted with multiplicity.
    """

    ES1: Fraction
    EC: Fraction
    ES2: Fraction
    ES2multi: Fraction


def expected_collision_counts(config: Configuration, r: int, k: int) -> CollisionCounts:
    r, k = check_order(r), _check_k(k)
    n = config.n
    s_r = sum(comb(x, r) for x in config.sizes)
    v_r = sum(x**r for x in config.sizes)
    kk = min(k, n)
    es1 = Fraction(falling_factorial(kk, r) * s_r, falling_factorial(n, r)) if s_r else Fraction(0)
    ec = Fraction(falling_factorial(k, r) * v_r, factorial(r) * n**r)
    diff = sum(comb(r, i) * (-1) ** i * Fraction(n - i, n) ** k for i in range(r + 1))
    es2 = diff * s_r
    es2m = Fraction(falling_factorial(k, r) * s_r, n**r)
    return CollisionCounts(ES1=es1, EC=ec, ES2=es2, ES2multi=es2m)


# --------------------------------------------------------------------------
# true collision versus repetition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrueCollisionReport:
    """Probability that the first r-hit with replacement is a true collision."""

    p_overall: float
    error: float
    conditional: tuple
    lower: Fraction
    upper: Fraction


def prob_true_collision_first(config: Configuration, r: int, tol: float = 1e-10) -> TrueCollisionReport:
    """``P(K2 = R)`` and its conditional values given the first-hit colour.

    Given that colour ``i`` is hit ``r`` times first, the hit is a true
    collision with probability ``(x_i)_r / x_i^r`` (zero when ``x_i < r``),
    so ``lower`` and ``upper`` are the extreme conditionals over occupied
    colours.  The overall value is

        sum_i r C(x_i, r) int_0^inf t^(r-1) e^(-n t) prod_{j != i} q_r(x_j t) dt,

    integrated after the substitution ``s = n t`` in log domain.
    """
    r = check_order(r)
    config.require_collisions(r)
    n = config.n
    conditional = tuple(Fraction(falling_factorial(x, r), x**r) if x >= r else Fraction(0)
                        for x in config.sizes)
    # an occupied cell below r can still be hit r times, never truly
    occupied = [c for x, c in zip(config.sizes, conditional) if x > 0]
    lower, upper = min(occupied), max(occupied)

    groups = _groups(config)
    probs = [(x / n, mult) for x, mult in groups]
    weights = [(x / n, mult * r * comb(x, r) / n**r) for x, mult in groups if x >= r]

    def integrand(s):
        if s <= 0.0:
            return 0.0
        log_body = -s + sum(mult * log_q_r(p * s, r) for p, mult in probs)
        w = sum(c * math.exp((r - 1) * math.log(s) - log_q_r(p * s, r)) for p, c in weights)
        return w * math.exp(log_body)

    s_tilde = sum(x**r for x in config.sizes) / factorial(r)
    scale = max(1.0, n / s_tilde ** (1.0 / r))
    value, err = integrate_half_line(integrand, scale=scale, tol=tol)
    return TrueCollisionReport(p_overall=value, error=err, conditional=conditional,
                               lower=lower, upper=upper)
