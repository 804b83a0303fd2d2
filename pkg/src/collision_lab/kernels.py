"""Exact and floating-point kernels.

The truncated exponential ``q_r``, the partial binomial sums ``p_r`` and the
binomial lower tail ``G_r`` are the building blocks of every waiting-time
formula.  Exact inputs (``int`` or ``Fraction``) give exact ``Fraction``
results; ``float`` inputs give floats.
"""
from __future__ import annotations

import math
import threading
from fractions import Fraction
from math import comb, factorial

import numpy as np
from scipy import special

from .configuration import check_order
from .errors import DomainError, ResourceError

__all__ = [
    "p_r_poly",
    "q_r_poly",
    "q_r_eval",
    "G_r_eval",
    "log_G_r",
    "log_q_r",
    "surjection_count",
    "stirling2",
    "elementary_symmetric",
    "image_cardinality_pmf",
    "falling_factorial",
    "poly_mul",
    "poly_pow",
    "poly_product",
    "beta",
    "log_beta",
    "MAX_STIRLING_K",
]

#: Largest ``k`` for which the Stirling table may be grown.
MAX_STIRLING_K = 2000

# direct summation of G_r is used up to this many trials, log-domain beyond
_LOG_DOMAIN_CROSSOVER = 1000


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


def falling_factorial(x, r: int):
    """``(x)_r = x (x-1) ... (x-r+1)``."""
    out = 1
    for i in range(r):
        out *= x - i
    return out


# --------------------------------------------------------------------------
# polynomials (dense coefficient lists, index = degree)
# --------------------------------------------------------------------------

def _trim(coeffs: list) -> list:
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def p_r_poly(x: int, r: int) -> list[int]:
    """Coefficients of ``p_r(x, t) = sum_{i<r} C(x, i) t^i``."""
    r = check_order(r)
    if x < 0:
        raise DomainError("x must be nonnegative")
    return [comb(x, i) for i in range(min(r - 1, x) + 1)]


def q_r_poly(x, r: int, scaled: bool = False) -> list:
    """Coefficients of ``q_r(x t) = sum_{i<r} (x t)^i / i!``.

    With ``scaled=True`` the polynomial is multiplied by ``(r-1)!`` so that
    integer ``x`` gives integer coefficients.
    """
    r = check_order(r)
    if scaled:
        f = factorial(r - 1)
        return _trim([x**i * (f // factorial(i)) for i in range(r)])
    return _trim([Fraction(x) ** i / factorial(i) for i in range(r)])


def poly_mul(a: list, b: list, max_degree: int | None = None) -> list:
    """Product of two coefficient lists, optionally truncated."""
    if not a or not b:
        return []
    deg = len(a) + len(b) - 2
    if max_degree is not None:
        deg = min(deg, max_degree)
    out = [0] * (deg + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > deg:
            continue
        for j in range(min(len(b), deg - i + 1)):
            out[i + j] += ai * b[j]
    return _trim(out)


def poly_pow(base: list, e: int, max_degree: int | None = None) -> list:
    """``base(t) ** e`` truncated at ``max_degree``.

    Uses the recurrence obtained from ``P' B = e B' P`` (J.C.P. Miller),
    which costs ``O(deg(B))`` per output coefficient.  For integer input the
    divisions are exact.
    """
    base = _trim(list(base))
    if e < 0:
        raise DomainError("negative powers are not supported")
    if e == 0:
        return [1]
    if not base:
        return []
    shift = 0
    while base[shift] == 0:
        shift += 1
    if shift:
        lead = shift * e
        if max_degree is not None and lead > max_degree:
            return []
        inner = poly_pow(base[shift:], e, None if max_degree is None else max_degree - lead)
        return [0] * lead + inner
    d = len(base) - 1
    deg = d * e if max_degree is None else min(d * e, max_degree)
    b0 = base[0]
    exact_int = all(isinstance(c, int) for c in base)
    out = [b0**e]
    for k in range(1, deg + 1):
        acc = 0
        for j in range(1, min(k, d) + 1):
            acc += ((e + 1) * j - k) * base[j] * out[k - j]
        if exact_int:
            val, rem = divmod(acc, k * b0)
            assert rem == 0
        else:
            val = acc / (k * b0)
        out.append(val)
    return _trim(out)


def poly_product(factors: list[tuple[list, int]], max_degree: int | None = None) -> list:
    """Product of ``base ** multiplicity`` over ``factors``, truncated.

    Powers are formed first, then multiplied smallest-degree first so that
    truncation keeps intermediate sizes small.
    """
    powers = [poly_pow(base, mult, max_degree) for base, mult in factors if mult]
    powers.sort(key=len)
    out = [1]
    for p in powers:
        out = poly_mul(out, p, max_degree)
    return out


# --------------------------------------------------------------------------
# q_r and G_r
# --------------------------------------------------------------------------

def q_r_eval(a, r: int):
    """``q_r(a) = sum_{i<r} a^i / i!``; exact for rational ``a``."""
    r = check_order(r)
    if a < 0:
        raise DomainError("q_r is evaluated at nonnegative arguments only")
    if _is_exact(a):
        a = Fraction(a)
        return sum((a**i / factorial(i) for i in range(r)), Fraction(0))
    a = float(a)
    term, total = 1.0, 1.0
    for i in range(1, r):
        term *= a / i
        total += term
    return total


def log_q_r(a: float, r: int) -> float:
    """``log q_r(a)`` for large float arguments without overflow."""
    if a <= 0.0:
        return 0.0
    if a < 50.0:
        return math.log(q_r_eval(float(a), r))
    # factor out the dominant last term a^(r-1)/(r-1)!
    top = (r - 1) * math.log(a) - math.lgamma(r)
    rest, term = 1.0, 1.0
    for i in range(r - 1, 0, -1):
        term *= i / a
        rest += term
    return top + math.log(rest)


def G_r_eval(x: int, r: int, t):
    """``G_r(x, t) = P(Binomial(x, t) <= r - 1)``.

    Exact for rational ``t``.  Float evaluations switch to a log-domain sum
    for ``x > 1000`` so that tiny values do not underflow prematurely.
    """
    r = check_order(r)
    if not 0 <= t <= 1:
        raise DomainError(f"t must lie in [0, 1], got {t!r}")
    if x < r:
        return Fraction(1) if _is_exact(t) else 1.0
    if _is_exact(t):
        t = Fraction(t)
        return sum((comb(x, i) * t**i * (1 - t) ** (x - i) for i in range(r)), Fraction(0))
    t = float(t)
    if t == 0.0:
        return 1.0
    if t == 1.0:
        return 0.0
    if x <= _LOG_DOMAIN_CROSSOVER:
        return math.fsum(comb(x, i) * t**i * (1.0 - t) ** (x - i) for i in range(r))
    return math.exp(_log_binomial_lower(x, r, t))


def _log_binomial_lower(x: int, r: int, t: float) -> float:
    lt, l1t = math.log(t), math.log1p(-t)
    lx = math.lgamma(x + 1)
    logs = [lx - math.lgamma(i + 1) - math.lgamma(x - i + 1) + i * lt + (x - i) * l1t
            for i in range(r)]
    top = max(logs)
    return top + math.log(math.fsum(math.exp(v - top) for v in logs))


def log_G_r(x: int, r: int, t: float) -> float:
    """``log G_r(x, t)`` in floating point, accurate near both ends.

    Near ``t = 0`` the upper tail is small and ``log1p(-tail)`` keeps full
    relative precision; elsewhere the lower tail is summed in log domain.
    """
    if x < r or t <= 0.0:
        return 0.0
    if t >= 1.0:
        return -math.inf
    tail = float(special.bdtrc(r - 1, x, t))
    if tail < 0.5:
        return math.log1p(-tail)
    return _log_binomial_lower(x, r, t)


# --------------------------------------------------------------------------
# combinatorial numbers
# --------------------------------------------------------------------------

class _StirlingTable:
    """Memoized Stirling numbers of the second kind, grown on demand.

    Rows are indexed by ``k`` and hold columns ``d <= width``; growing the
    width rebuilds the table.  Access is serialized by a lock.
    """

    def __init__(self, max_k: int):
        self.max_k = max_k
        self.width = 0
        self.rows: list[list[int]] = [[1]]
        self._lock = threading.Lock()

    def get(self, k: int, d: int) -> int:
        if d > k:
            return 0
        if k > self.max_k:
            raise ResourceError(
                f"Stirling table limited to k <= {self.max_k}; requested k = {k}"
            )
        with self._lock:
            if d > self.width:
                self._rebuild(max(d, 2 * self.width, 8), len(self.rows) - 1)
            while len(self.rows) <= k:
                self._extend()
            return self.rows[k][d]

    def _rebuild(self, width: int, k_max: int):
        self.width = width
        self.rows = [[1] + [0] * width]
        for _ in range(k_max):
            self._extend()

    def _extend(self):
        prev = self.rows[-1]
        row = [0] * (self.width + 1)
        for d in range(1, self.width + 1):
            row[d] = d * prev[d] + prev[d - 1]
        self.rows.append(row)


_STIRLING = _StirlingTable(MAX_STIRLING_K)


def stirling2(k: int, d: int) -> int:
    """Stirling number of the second kind ``S(k, d)``."""
    if k < 0 or d < 0:
        raise DomainError("Stirling numbers need nonnegative arguments")
    return _STIRLING.get(k, d)


def surjection_count(k: int, d: int) -> int:
    """Number of onto maps from a ``k``-set to a ``d``-set, ``d! S(k, d)``."""
    return factorial(d) * stirling2(k, d) if d <= k else 0


def elementary_symmetric(values, k_max: int) -> list:
    """``[Sym_0, ..., Sym_{k_max}]`` of ``values`` (exact for exact input)."""
    if k_max < 0:
        raise DomainError("k_max must be nonnegative")
    e = [Fraction(1)] + [Fraction(0)] * k_max
    for v in values:
        for k in range(k_max, 0, -1):
            e[k] += v * e[k - 1]
    return e


def image_cardinality_pmf(k: int, n: int) -> list[Fraction]:
    """Distribution of the image size of a uniform random map ``[k] -> [n]``.

    Entry ``d`` is ``C(n, d) Sur(k, d) / n^k``.
    """
    if n < 1 or k < 0:
        raise DomainError("need k >= 0 and n >= 1")
    denom = n**k
    return [Fraction(comb(n, d) * surjection_count(k, d), denom) for d in range(min(k, n) + 1)]


# --------------------------------------------------------------------------
# Beta function
# --------------------------------------------------------------------------

def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta(a: float, b: float) -> float:
    """Euler Beta function via log-Gamma."""
    return math.exp(log_beta(a, b))


def log_binomial_float(n: int, k) -> np.ndarray:
    """Vectorized ``log C(n, k)``."""
    k = np.asarray(k, dtype=float)
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
