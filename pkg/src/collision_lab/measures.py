"""Balance measures of a configuration and moments of random collision counts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

from .configuration import Configuration, check_order
from .errors import DomainError

__all__ = [
    "BalanceReport",
    "chi2_statistic",
    "balance_measures",
    "random_mapping_moments",
    "concentration_check",
    "expected_cell_counts",
]


def chi2_statistic(config: Configuration) -> Fraction:
    """``T = (m/n) sum (x_i - n/m)^2 = (m/n) sum x_i^2 - n``."""
    return Fraction(config.m, config.n) * sum(x * x for x in config.sizes) - config.n


@dataclass(frozen=True)
class BalanceReport:
    T_chi2: Fraction
    mu2: float
    mu2_from_chi2: float
    lambda_r: float | None
    m_eff: float | None
    s_r: int
    s_tilde_r: Fraction


def balance_measures(config: Configuration, r: int) -> BalanceReport:
    """Logarithmic balance scores, base ``m``.

    ``mu2 = -log_m(sum x_i^2 / n^2)``, also computed as ``1 - log_m(1 + T/n)``
    from the chi-square statistic.  ``lambda_r = -log_m(r! s_r / n^r) / (r-1)``
    is ``None`` for configurations without r-collisions.
    """
    r = check_order(r)
    m, n = config.m, config.n
    if m < 2:
        raise DomainError("balance measures use base-m logarithms and need m >= 2")
    log_m = math.log(m)
    t = chi2_statistic(config)
    mu2 = 0.0 - math.log(Fraction(sum(x * x for x in config.sizes), n * n)) / log_m
    mu2_alt = 1.0 - math.log1p(t / n) / log_m
    s_r = sum(comb(x, r) for x in config.sizes)
    lam = m_eff = None
    if s_r:
        ratio = Fraction(factorial(r) * s_r, n**r)
        lam = -math.log(ratio) / ((r - 1) * log_m)
        m_eff = float(1 / ratio)
    return BalanceReport(t, mu2, mu2_alt, lam, m_eff, s_r,
                         Fraction(sum(x**r for x in config.sizes), factorial(r)))


def random_mapping_moments(n: int, m: int, r: int) -> dict:
    """Mean and variance of the number of monochromatic r-sets when ``n``
    balls are coloured independently and uniformly with ``m`` colours.

    Two r-sets sharing ``i >= 1`` balls are both monochromatic with
    probability ``m^(1 - 2r + i)``; disjoint ones with ``m^(2 - 2r)``.
    """
    r = check_order(r)
    if n < 1 or m < 1:
        raise DomainError("need n >= 1 and m >= 1")
    sets = comb(n, r)
    rest = max(n - r, 0)
    mean = Fraction(sets, m ** (r - 1))
    second = Fraction(sets * comb(rest, r), m ** (2 * r - 2))
    for i in range(1, r + 1):
        second += Fraction(sets * comb(r, i) * comb(rest, r - i) * m**i, m ** (2 * r - 1))
    return {"mean": mean, "variance": second - mean * mean}


def concentration_check(n: int, m: int, r: int) -> dict:
    """Mean and standard deviation of ``m^(r-1) / n^r`` times the collision count."""
    mom = random_mapping_moments(n, m, r)
    scale = Fraction(m ** (r - 1), n**r)
    return {"scaled_mean": float(scale * mom["mean"]),
            "scaled_std": float(scale) * math.sqrt(mom["variance"])}


def expected_cell_counts(k: int, m: int, j: int) -> Fraction:
    """Expected number of cells with exactly ``j`` of ``k`` uniform balls among ``m`` cells."""
    if m < 1 or not 0 <= j <= k:
        raise DomainError("need m >= 1 and 0 <= j <= k")
    return m * comb(k, j) * Fraction(1, m) ** j * Fraction(m - 1, m) ** (k - j)
