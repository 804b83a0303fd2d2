"""Large-scale behaviour: the classical series for ``E R`` and limit laws.

The classical expansion reads

    E R_r ~ (n/r) sum_i a_i(r) Gamma((i+1)/r) (r!/n)^((i+1)/r)

where ``a_i(r)`` are the Taylor coefficients of ``dy/dt`` for the inverse
of ``t = (r! (y - log q_r(y)))^(1/r)``.  They are stored for ``r <= 5`` and
recomputed for any ``r`` by Lagrange inversion in exact arithmetic.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .configuration import check_order, parse_rational
from .errors import DomainError
from .expectations import ConfigStatistics
from .kernels import log_G_r, log_q_r, poly_product, q_r_poly

__all__ = [
    "STORED_COEFFICIENTS",
    "MAX_SERIES_TERMS",
    "AsymptoticSeries",
    "LimitModel",
    "RegimeReport",
    "series_coefficients",
    "classical_ER_series",
    "limit_survival",
    "time_scales",
    "classify_regime",
    "VARIANTS",
]

F = Fraction

STORED_COEFFICIENTS = {
    2: (F(1), F(2, 3), F(1, 12), F(-2, 135), F(1, 864)),
    3: (F(1), F(1, 2), F(21, 80), F(7, 240), F(83, 13440)),
    4: (F(1), F(2, 5), F(17, 100), F(194, 2625), F(271, 42000)),
    5: (F(1), F(1, 3), F(5, 42), F(11, 252), F(515, 31752)),
}

MAX_SERIES_TERMS = 40

_series_lock = threading.Lock()
_series_cache: dict[int, tuple] = {}


def _log_series(q: list, size: int) -> list:
    """Taylor coefficients of ``log Q`` for ``Q(0) = 1``."""
    q = q + [F(0)] * (size - len(q))
    out = [F(0)] * size
    for k in range(1, size):
        acc = sum((j * out[j] * q[k - j] for j in range(1, k)), F(0))
        out[k] = q[k] - acc / k
    return out


def _power_series(h: list, alpha: Fraction, size: int) -> list:
    """Taylor coefficients of ``h ** alpha`` for ``h(0) = 1``."""
    out = [F(1)] + [F(0)] * (size - 1)
    for k in range(1, size):
        acc = sum((((alpha + 1) * j - k) * h[j] * out[k - j] for j in range(1, min(k, len(h) - 1) + 1)),
                  F(0))
        out[k] = acc / k
    return out


def series_coefficients(r: int, terms: int) -> tuple[Fraction, ...]:
    """``a_0(r), ..., a_{terms-1}(r)`` by Lagrange inversion.

    With ``r! (y - log q_r(y)) = y^r h(y)`` one has
    ``a_i = [y^i] h(y)^(-(i+1)/r)``.
    """
    r = check_order(r)
    if not 1 <= terms <= MAX_SERIES_TERMS:
        raise DomainError(f"terms must lie in 1..{MAX_SERIES_TERMS}, got {terms}")
    with _series_lock:
        cached = _series_cache.get(r)
        if cached is not None and len(cached) >= terms:
            return cached[:terms]
    size = r + terms
    q = [F(1, factorial(i)) for i in range(r)]
    log_q = _log_series(q, size)
    phi = [-c for c in log_q]
    phi[1] += 1
    h = [factorial(r) * c for c in phi[r:size]]
    coeffs = tuple(_power_series(h, F(-(i + 1), r), i + 1)[i] for i in range(terms))
    with _series_lock:
        _series_cache[r] = coeffs
    return coeffs


@dataclass(frozen=True)
class AsymptoticSeries:
    r: int
    coefficients: tuple
    terms: int

    def value(self, n: int) -> float:
        r = self.r
        base = factorial(r) / n
        total = math.fsum(float(a) * math.gamma((i + 1) / r) * base ** ((i + 1) / r)
                          for i, a in enumerate(self.coefficients[:self.terms]))
        return n / r * total


def _series(r: int, terms: int) -> AsymptoticSeries:
    r = check_order(r)
    if not 1 <= terms <= MAX_SERIES_TERMS:
        raise DomainError(f"terms must lie in 1..{MAX_SERIES_TERMS}, got {terms}")
    stored = STORED_COEFFICIENTS.get(r, ())
    coeffs = stored[:terms] if terms <= len(stored) else series_coefficients(r, terms)
    return AsymptoticSeries(r=r, coefficients=coeffs, terms=terms)


def classical_ER_series(n: int, r: int, terms: int) -> float:
    """Truncated asymptotic series for ``E R_r`` with ``n`` equally likely colours."""
    if n < 1:
        raise DomainError("n must be positive")
    return _series(r, terms).value(n)


# --------------------------------------------------------------------------
# limit laws
# --------------------------------------------------------------------------

VARIANTS = ("Type1_K1", "Type1_K2", "Type2_collision", "Type2_repetition", "Type3_discrete")


@dataclass(frozen=True)
class LimitModel:
    """A limit law for a scaled waiting time.

    ``params`` holds limit cell sizes (Type1), weights ``rho`` / ``theta``
    (Type2) or cell probabilities (Type3).
    """

    variant: str
    r: int
    params: tuple

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        r = check_order(self.r)
        params = tuple(self.params)
        if self.variant.startswith("Type1"):
            if not params or any(int(x) != x or x < r for x in params):
                raise DomainError("Type1 needs limit cell sizes, each at least r")
            params = tuple(int(x) for x in params)
        elif self.variant.startswith("Type2"):
            params = tuple(float(v) for v in params)
            if any(not 0.0 <= v <= 1.0 for v in params) or sum(v**r for v in params) > 1 + 1e-9:
                raise DomainError("Type2 weights must lie in [0, 1] with sum of r-th powers <= 1")
        else:
            params = tuple(parse_rational(p) if not isinstance(p, float) else p for p in params)
            if any(p < 0 for p in params) or abs(sum(params) - 1) > 1e-12:
                raise DomainError("Type3 probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "params", params)


def _weibull_mix(weights, r: int, t: float) -> float:
    rest = max(0.0, 1.0 - sum(v**r for v in weights))
    log_val = -rest * t**r / factorial(r)
    log_val += sum(log_q_r(v * t, r) - v * t for v in weights)
    return min(1.0, math.exp(log_val))


def limit_survival(model: LimitModel, arg) -> float:
    """Limit survival function at ``t`` (continuous variants) or ``k`` (Type3)."""
    r = model.r
    if arg < 0:
        raise DomainError("the argument must be nonnegative")
    v = model.variant
    if v == "Type1_K1":
        if arg >= 1:
            return 0.0
        return math.exp(sum(log_G_r(x, r, float(arg)) for x in model.params))
    if v == "Type1_K2":
        t = -math.expm1(-float(arg))
        return math.exp(sum(log_G_r(x, r, t) for x in model.params))
    if v.startswith("Type2"):
        return _weibull_mix(model.params, r, float(arg))
    if int(arg) != arg:
        raise DomainError("the discrete limit takes an integer argument")
    k = int(arg)
    probs = [Fraction(p) for p in model.params if p]
    coeffs = poly_product([(q_r_poly(p, r), 1) for p in probs], max_degree=k)
    return float(factorial(k) * coeffs[k]) if k < len(coeffs) else 0.0


def time_scales(stats: ConfigStatistics) -> dict:
    """Characteristic waiting-time scales.

    ``collision_scale = n / s_r^(1/r)`` and ``repetition_scale = n /
    s_tilde_r^(1/r)`` give the order of the expectations.  The limit laws
    are taken at ``m_r^(1/r)`` (collisions) and ``m_tilde_r^(1/r)``
    (repetitions); ``limit_scale_alt`` is the alternative
    ``m_r^((r-1)/r)``, which only agrees for ``r = 2``.
    """
    n, r = stats.n, stats.r
    out = {
        "collision_scale": None,
        "repetition_scale": n / float(stats.s_tilde_r) ** (1.0 / r),
        "limit_scale": None,
        "limit_scale_alt": None,
        "repetition_limit_scale": float(stats.m_tilde_r) ** (1.0 / r),
    }
    if stats.s_r:
        m_r = float(stats.m_r)
        out["collision_scale"] = n / stats.s_r ** (1.0 / r)
        out["limit_scale"] = m_r ** (1.0 / r)
        out["limit_scale_alt"] = m_r ** ((r - 1) / r)
    return out


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    model: LimitModel | None
    s_r: int
    m_r: float | None
    max_share: float
    thresholds: dict


def classify_regime(stats: ConfigStatistics, threshold_sigma: float = 8,
                    threshold_m: float = 1000) -> RegimeReport:
    """Heuristic choice of limit law for a single configuration.

    ``NoCollisions`` when ``s_r = 0``; ``Type1`` when few potential
    collisions sit in a large effective range; ``Type3`` when the effective
    range is small and one cell holds a visible share of the balls;
    ``Type2`` otherwise.
    """
    r, n = stats.r, stats.n
    share = stats.x_max / n
    thresholds = {"sigma": threshold_sigma, "m": threshold_m, "share": 0.05}
    if not stats.s_r:
        return RegimeReport("NoCollisions", None, 0, None, share, thresholds)
    m_r = float(stats.m_r)
    if stats.s_r <= threshold_sigma and m_r > threshold_m:
        sizes = tuple(sorted((x for x in stats.sizes if x >= r), reverse=True))
        model = LimitModel("Type1_K1", r, sizes)
        regime = "Type1"
    elif m_r <= threshold_m and share > 0.05:
        model = LimitModel("Type3_discrete", r, tuple(Fraction(x, n) for x in stats.sizes if x))
        regime = "Type3"
    else:
        rho = tuple(sorted((v for v in stats.rho if v > 0), reverse=True))
        model = LimitModel("Type2_collision", r, rho)
        regime = "Type2"
    return RegimeReport(regime, model, stats.s_r, m_r, share, thresholds)
