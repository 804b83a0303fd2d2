"""Expectations of the waiting times, their integral forms and bounds.

Exact values are rational: ``E K1`` and ``E R`` are finite sums of survival
probabilities, and ``E K2`` follows from the time a coupon collector spends
with exactly ``d`` distinct balls (``n / (n - d)`` draws on average).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

from .configuration import Configuration, check_order
from .errors import DomainError, InvalidQueryError
from . import exact_dist as _ed
from .kernels import log_G_r, log_beta, log_q_r
from .quadrature import integrate, integrate_half_line

__all__ = [
    "ConfigStatistics",
    "ExpectationBounds",
    "ClosedForms",
    "config_statistics",
    "expectation_exact",
    "expectation_K2_truncated",
    "expectation_quadrature",
    "closed_forms",
    "bounds_lower",
    "bounds_upper_majorization",
    "bounds_upper_matched",
    "expectation_bounds",
    "gap_constant",
    "gap_bound",
    "true_collision_split_bounds",
]


@dataclass(frozen=True)
class ConfigStatistics:
    """Summary numbers of a configuration for collision order ``r``.

    ``m_r``, ``u_r`` and ``rho`` are ``None`` / empty when no cell holds
    ``r`` balls.  ``theta_i = x_i / v_r^(1/r)`` so that ``sum theta_i^r = 1``.
    """

    r: int
    n: int
    m: int
    sizes: tuple
    s_r: int
    s_tilde_r: Fraction
    v_r: int
    m_r: Fraction | None
    m_tilde_r: Fraction
    u_r: Fraction | None
    M_r: tuple
    b: int
    d: int
    w: int
    x_max: int
    rho: tuple = field(default=())
    theta: tuple = field(default=())


def config_statistics(config: Configuration, r: int) -> ConfigStatistics:
    r = check_order(r)
    sizes, n = config.sizes, config.n
    s_r = sum(comb(x, r) for x in sizes)
    v_r = sum(x**r for x in sizes)
    heavy = tuple(i for i, x in enumerate(sizes) if x >= r)
    rho = tuple((comb(x, r) / s_r) ** (1.0 / r) for x in sizes) if s_r else ()
    root = v_r ** (1.0 / r)
    return ConfigStatistics(
        r=r,
        n=n,
        m=config.m,
        sizes=sizes,
        s_r=s_r,
        s_tilde_r=Fraction(v_r, factorial(r)),
        v_r=v_r,
        m_r=Fraction(n**r, factorial(r) * s_r) if s_r else None,
        m_tilde_r=Fraction(n**r, v_r),
        u_r=Fraction(sum(sizes[i] for i in heavy), len(heavy)) if heavy else None,
        M_r=heavy,
        b=config.occupied(),
        d=sum(x * comb(x, r) for x in sizes),
        w=min(n, config.m),
        x_max=config.max_size(),
        rho=rho,
        theta=tuple(x / root for x in sizes),
    )


# --------------------------------------------------------------------------
# exact expectations
# --------------------------------------------------------------------------

def expectation_exact(config: Configuration, r: int, mode: str, exact: bool | None = None):
    """``E T`` for ``T`` in ``K1``, ``K2``, ``R``.

    Exact (``Fraction``) up to ``n = EXACT_MAX_N`` unless ``exact`` says
    otherwise; the float path sums log-domain survival values.
    """
    r, mode = check_order(r), _ed._check_mode(mode)
    n = config.n
    if mode != "R":
        config.require_collisions(r)
    if not _ed._use_exact(n, exact):
        if mode == "R":
            return math.fsum(_ed._float_survival_R(config, r))
        s1 = _ed._float_survival_K1(config, r)
        if mode == "K1":
            return math.fsum(s1)
        return math.fsum(s1[d] * n / (n - d) for d in range(min(len(s1), n)))
    if mode == "R":
        c, scale = _ed.repetition_coefficients(config, r)
        # sum_k k! c_k / n^k, accumulated over the common denominator n^D
        acc, fact = 0, 1
        for k, ck in enumerate(c):
            if k:
                fact *= k
            acc = acc * n + fact * ck
        return Fraction(acc, scale * n ** (len(c) - 1))
    c = _ed.collision_coefficients(config, r)
    fact, total = 1, 0
    if mode == "K1":
        # sum_k c_k / C(n, k) = sum_k c_k k! (n-k)! / n!
        for k, ck in enumerate(c):
            if k:
                fact *= k
            total += ck * fact * factorial(n - k)
        return Fraction(total, factorial(n))
    # sum_{d<n} P(K1 > d) n / (n - d)
    for d, cd in enumerate(c[:n]):
        if d:
            fact *= d
        total += cd * fact * factorial(n - d - 1)
    return Fraction(n * total, factorial(n))


def expectation_K2_truncated(config: Configuration, r: int, tol: float = 1e-15) -> tuple[float, float]:
    """``E K2`` by summing the survival sequence; returns ``(value, tail)``.

    Summation stops once ``k > n`` and the current term is below ``tol`` times
    the partial sum.  The remainder is extrapolated as a geometric series from
    the last two terms and added; ``tail`` is that extrapolated amount.
    """
    r = check_order(r)
    n = config.n
    partial, prev = 0.0, None
    for k, p in enumerate(_ed.iter_survival_K2(config, r, exact=False)):
        partial += p
        if k > n and p < tol * partial:
            ratio = p / prev if prev else 0.0
            tail = p * ratio / (1.0 - ratio) if ratio < 1.0 else 0.0
            return partial + tail, tail
        prev = p


# --------------------------------------------------------------------------
# integral representations
# --------------------------------------------------------------------------

def _heavy_groups(config: Configuration, r: int) -> list[tuple[int, int]]:
    return [(x, mult) for x, mult in sorted(config.counts().items()) if x >= r]


def _breakpoints(tau: float, upper: float | None = None) -> list[float]:
    pts = [tau * c for c in (0.25, 0.5, 1.0, 2.0, 4.0)]
    return [p for p in pts if upper is None or p < upper]


def _k1_integral(groups, r: int, tol: float) -> float:
    """``int_0^1 prod G_r(x, t)^mult dt``."""

    def f(t):
        return math.exp(sum(mult * log_G_r(x, r, t) for x, mult in groups))

    s_r = sum(mult * comb(x, r) for x, mult in groups)
    tau = s_r ** (-1.0 / r) * min(1.0, r / max(x for x, _ in groups))
    return integrate(f, 0.0, 1.0, tol=tol, points=_breakpoints(tau, 1.0))[0]


def _k2_integral(groups, r: int, tol: float) -> float:
    """``int_0^inf prod G_r(x, 1 - e^-s)^mult ds``."""

    def f(s):
        t = -math.expm1(-s)
        return math.exp(sum(mult * log_G_r(x, r, t) for x, mult in groups))

    s_r = sum(mult * comb(x, r) for x, mult in groups)
    tau = s_r ** (-1.0 / r)
    return integrate_half_line(f, scale=tau, tol=tol, points=_breakpoints(tau))[0]


def _r_integral(groups, n: int, r: int, tol: float) -> float:
    """``int_0^inf e^-s prod q_r(x s / n)^mult ds``."""
    probs = [(x / n, mult) for x, mult in groups]

    def f(s):
        return math.exp(-s + sum(mult * log_q_r(p * s, r) for p, mult in probs))

    v_r = sum(mult * x**r for x, mult in groups)
    tau = n / (v_r / factorial(r)) ** (1.0 / r)
    return integrate_half_line(f, scale=tau, tol=tol, points=_breakpoints(tau))[0]


def expectation_quadrature(config: Configuration, r: int, mode: str, tol: float = 1e-10) -> float:
    """``E T`` from its integral representation.

    ``E K1 = (n+1) int_0^1 prod G_r(x_i, t) dt``,
    ``E K2 = n int_0^inf prod G_r(x_i, 1-e^-s) ds`` and
    ``E R = int_0^inf e^-s prod q_r(x_i s / n) ds``; only cells with
    ``x_i >= r`` enter the first two products.
    """
    r, mode = check_order(r), _ed._check_mode(mode)
    if tol <= 0:
        raise DomainError("tol must be positive")
    n = config.n
    if mode == "R":
        return _r_integral(sorted(config.counts().items()), n, r, tol)
    config.require_collisions(r)
    groups = _heavy_groups(config, r)
    if mode == "K1":
        return (n + 1) * _k1_integral(groups, r, tol)
    return n * _k2_integral(groups, r, tol)


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedForms:
    shape: str
    K1: Fraction
    K2: Fraction


def _beta_rational(a: Fraction, k: int) -> Fraction:
    """``B(a, k)`` for positive integer ``k``: ``(k-1)! / prod_{j<k} (a + j)``."""
    den = Fraction(1)
    for j in range(k):
        den *= a + j
    return factorial(k - 1) / den


def closed_forms(config: Configuration, r: int) -> ClosedForms | None:
    """Closed-form ``E K1`` and ``E K2`` for two special shapes, else ``None``.

    ``"capped"``: every cell holds at most ``r`` balls and ``a >= 1`` hold
    exactly ``r``.  ``"single"``: exactly one cell holds ``x >= r`` balls.
    """
    r = check_order(r)
    n = config.n
    heavy = [x for x in config.sizes if x >= r]
    if not heavy:
        return None
    if len(heavy) == 1:
        x = heavy[0]
        k1 = Fraction(r * (n + 1), x + 1)
        k2 = n * sum(Fraction(1, x - i) for i in range(r))
        return ClosedForms("single", k1, k2)
    if max(heavy) == r:
        a = len(heavy)
        k1 = Fraction(n + 1) * factorial(a) * r**a
        for i in range(1, a + 1):
            k1 /= 1 + i * r
        k2 = Fraction(n, r) * sum(_beta_rational(Fraction(i, r), a) for i in range(1, r + 1))
        return ClosedForms("capped", k1, k2)
    return None


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def _gamma_factor(r: int) -> float:
    return math.gamma(1.0 + 1.0 / r)


def bounds_lower(stats: ConfigStatistics) -> dict:
    """Lower bounds on the three expectations.

    ``K1_beta = (n+1)/r B(1/r, 1+s_r)`` is the sharper one for ``K1``;
    ``K1_gamma`` is its simpler Gamma-function relaxation.
    """
    n, r = stats.n, stats.r
    g = _gamma_factor(r)
    out = {"R": g * n / float(stats.s_tilde_r) ** (1.0 / r),
           "K1_beta": None, "K1_gamma": None, "K2": None}
    if stats.s_r:
        out["K1_beta"] = (n + 1) / r * math.exp(log_beta(1.0 / r, 1.0 + stats.s_r))
        out["K1_gamma"] = g * (n + 1) / (stats.s_r + 1) ** (1.0 / r)
        out["K2"] = g * n / stats.s_r ** (1.0 / r)
    return out


def _balanced_sizes(total: int, cells: int) -> list[tuple[int, int]]:
    q, rem = divmod(total, cells)
    return [(x, mult) for x, mult in ((q, cells - rem), (q + 1, rem)) if mult]


def bounds_upper_majorization(stats: ConfigStatistics, tol: float = 1e-10) -> dict:
    """Upper bounds from the most balanced competitor configuration.

    For ``K1`` and ``K2`` the heavy cells are replaced by ``|M_r|`` cells
    of (nearly) equal size holding the same number of balls; ``R`` uses
    ``w = min(n, m)`` equal cells, ``w int e^(-w s) q_r(s)^w ds``.
    """
    n, r = stats.n, stats.r
    w = stats.w

    def f(s):
        return math.exp(w * (log_q_r(s, r) - s))

    scale = (factorial(r) / w) ** (1.0 / r)
    out = {"R": w * integrate_half_line(f, scale=scale, tol=tol)[0], "K1": None, "K2": None}
    if stats.M_r:
        groups = _balanced_sizes(sum(stats.sizes[i] for i in stats.M_r), len(stats.M_r))
        out["K1"] = (n + 1) * _k1_integral(groups, r, tol)
        out["K2"] = n * _k2_integral(groups, r, tol)
    return out


def bounds_upper_matched(stats: ConfigStatistics) -> dict:
    """Upper bounds of the same order as :func:`bounds_lower`.

    ``K12`` bounds both ``E K1`` and ``E K2``.  ``R`` uses binomial
    weights ``C(x_max, i)`` like ``K12``; ``R_factorial_weights`` swaps in
    ``x_max^i / i!``, the coefficients of ``q_r(x_max t)``, which is looser
    but follows directly from bounding each cell by the largest one.
    """
    n, r, x1 = stats.n, stats.r, stats.x_max

    def matched(scale: float, weights) -> float:
        body = sum(wt / r * math.gamma((i + 1) / r) * scale ** (-i / r) for i, wt in enumerate(weights))
        return n / scale ** (1.0 / r) * body

    st = float(stats.s_tilde_r)
    out = {
        "R": matched(st, [comb(x1, i) for i in range(r)]),
        "R_factorial_weights": matched(st, [x1**i / factorial(i) for i in range(r)]),
        "K12": None,
    }
    if stats.s_r:
        out["K12"] = matched(float(stats.s_r), [comb(x1, i) for i in range(r)])
    return out


@dataclass(frozen=True)
class ExpectationBounds:
    lower: float | None
    upper_majorization: float | None
    upper_matched: float | None
    method_notes: str


def expectation_bounds(config: Configuration, r: int, mode: str) -> ExpectationBounds:
    """Best available lower and both upper bounds for one waiting time."""
    mode = _ed._check_mode(mode)
    stats = config_statistics(config, r)
    lo, maj, mat = bounds_lower(stats), bounds_upper_majorization(stats), bounds_upper_matched(stats)
    if mode == "R":
        return ExpectationBounds(lo["R"], maj["R"], mat["R"],
                                 "lower: Gamma form in s_tilde_r; matched upper uses C(x_max, i) weights")
    if not stats.s_r:
        raise InvalidQueryError(f"no preimage has {stats.r} or more points")
    lower = lo["K1_beta"] if mode == "K1" else lo["K2"]
    note = "lower: Beta form (n+1)/r B(1/r, 1+s_r)" if mode == "K1" else "lower: Gamma form in s_r"
    return ExpectationBounds(lower, maj[mode], mat["K12"],
                             note + "; majorization upper from the balanced heavy cells")


@lru_cache(maxsize=None)
def gap_constant(r: int) -> float:
    """``C_r = r^(-2/r) int_0^inf t (e^-t q_r(t))^(r^(1-r)) dt``."""
    r = check_order(r)
    power = float(r) ** (1 - r)

    def f(t):
        return t * math.exp(power * (log_q_r(t, r) - t))

    scale = 1.0 / power
    return r ** (-2.0 / r) * integrate_half_line(f, scale=scale, tol=1e-12)[0]


def gap_bound(stats: ConfigStatistics) -> dict:
    """Bound on ``E K2 - E K1``: ``C_r n / s_r^(2/r)``."""
    if not stats.s_r:
        raise InvalidQueryError(f"no preimage has {stats.r} or more points")
    c = gap_constant(stats.r)
    return {"C_r": c, "bound": c * stats.n / stats.s_r ** (2.0 / stats.r)}


def true_collision_split_bounds(config: Configuration) -> dict:
    """``n / sum x_i^2 <= P(R_2 < K_2) <= b / n`` as exact rationals."""
    if config.n < 2:
        raise DomainError("need at least two balls")
    return {"lower": Fraction(config.n, sum(x * x for x in config.sizes)),
            "upper": Fraction(config.occupied(), config.n)}
