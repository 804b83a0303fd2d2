import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import special

from helpers import random_battery
from collision_lab import Configuration, InvalidQueryError
from collision_lab import exact_dist as ed
from collision_lab import expectations as ex
from collision_lab.montecarlo import simulate_waiting_times

F = Fraction
HAND = Configuration((2, 2))
BATTERY = random_battery(200)


def test_statistics_examples():
    stats = ex.config_statistics(HAND, 2)
    assert stats.s_r == 2 and stats.m_r == 4
    assert stats.rho == pytest.approx((2**-0.5, 2**-0.5))
    assert stats.s_tilde_r == 4 and stats.v_r == 8 and stats.m_tilde_r == 2
    injective = ex.config_statistics(Configuration((1,) * 6), 2)
    assert injective.s_r == 0 and injective.m_r is None and injective.rho == ()
    single = ex.config_statistics(Configuration((4,)), 2)
    assert (single.d, single.b, single.u_r) == (24, 1, 4)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=8).filter(lambda s: max(s) >= 2),
       st.integers(2, 4))
def test_statistics_invariants(sizes, r):
    stats = ex.config_statistics(Configuration(tuple(sizes)), r)
    assert all(math.comb(x, r) * math.factorial(r) <= x**r for x in sizes)
    assert stats.s_r <= stats.s_tilde_r
    assert sum(t**r for t in stats.theta) == pytest.approx(1.0)
    if stats.s_r:
        assert all(0.0 <= v <= 1.0 for v in stats.rho)
        assert sum(v**r for v in stats.rho) == pytest.approx(1.0)


def test_exact_examples():
    assert ex.expectation_exact(HAND, 2, "K1") == F(8, 3)
    assert ex.expectation_exact(HAND, 2, "R") == F(5, 2)
    assert ex.expectation_exact(HAND, 2, "K2") == F(11, 3)


def test_exact_matches_survival_sums():
    for config, r in BATTERY[:60]:
        for mode in ("K1", "R"):
            table = ed.survival_table(config, r, mode)
            assert ex.expectation_exact(config, r, mode) == sum(table.entries)


def test_K2_routes_agree():
    # the exact value comes from the distinct-ball chain; the truncated
    # series sums the survival function itself
    for config, r in BATTERY[:80]:
        exact = ex.expectation_exact(config, r, "K2")
        value, tail = ex.expectation_K2_truncated(config, r)
        assert value == pytest.approx(float(exact), rel=1e-12)
        assert 0 <= tail <= 1e-12 * value


def test_K2_geometric_tail_by_hand():
    by_hand = 1 + math.fsum(4 * 2.0**-k - 4 * 4.0**-k for k in range(1, 200))
    assert by_hand == pytest.approx(11 / 3, rel=1e-15)
    assert ex.expectation_K2_truncated(HAND, 2)[0] == pytest.approx(by_hand, rel=1e-14)


@pytest.mark.parametrize("mode", ["K1", "K2", "R"])
def test_quadrature_examples(mode):
    expected = {"K1": 8 / 3, "K2": 11 / 3, "R": 5 / 2}[mode]
    assert ex.expectation_quadrature(HAND, 2, mode) == pytest.approx(expected, abs=1e-9)


def test_quadrature_against_scipy_by_hand():
    k1 = 5 * sp_integrate.quad(lambda t: (1 - t * t) ** 2, 0, 1)[0]
    k2 = 4 * sp_integrate.quad(lambda t: (2 * math.exp(-t) - math.exp(-2 * t)) ** 2, 0, math.inf)[0]
    assert k1 == pytest.approx(8 / 3, rel=1e-12)
    assert k2 == pytest.approx(11 / 3, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 7, 30])
@pytest.mark.parametrize("r", [2, 3])
def test_constant_map(n, r):
    if n < r:
        return
    config = Configuration((n,))
    assert ex.expectation_exact(config, r, "K1") == r
    assert ex.expectation_quadrature(config, r, "K1") == pytest.approx(r, abs=1e-9)
    k2 = r + sum(F(i, n - i) for i in range(1, r))
    assert ex.expectation_exact(config, r, "K2") == k2
    assert ex.expectation_quadrature(config, r, "K2") == pytest.approx(float(k2), abs=1e-9)
    if r == 2:
        assert k2 == 2 + F(1, n - 1)


def test_quadrature_agrees_on_battery():
    tol = 1e-10
    for config, r in BATTERY:
        for mode in ("K1", "K2", "R"):
            exact = float(ex.expectation_exact(config, r, mode))
            quad = ex.expectation_quadrature(config, r, mode, tol=tol)
            assert abs(quad - exact) <= 10 * tol * max(1.0, exact), (config, r, mode)


def test_float_expectations_agree_with_exact():
    for config, r in BATTERY[:40]:
        for mode in ("K1", "K2", "R"):
            exact = ex.expectation_exact(config, r, mode)
            approx = ex.expectation_exact(config, r, mode, exact=False)
            assert isinstance(approx, float)
            assert approx == pytest.approx(float(exact), rel=1e-11)


def test_closed_form_examples():
    single = ex.closed_forms(Configuration((4,)), 2)
    assert single.shape == "single" and single.K1 == 2
    capped = ex.closed_forms(HAND, 2)
    assert capped.shape == "capped" and capped.K1 == F(8, 3) and capped.K2 == F(11, 3)
    # Beta form of the capped K1
    assert float(capped.K1) == pytest.approx(5 / 2 * special.beta(0.5, 3), rel=1e-14)
    assert ex.closed_forms(Configuration((3, 3)), 2) is None
    assert ex.closed_forms(Configuration((1, 1)), 2) is None


@pytest.mark.parametrize("r", [2, 3, 4])
@pytest.mark.parametrize("light", [0, 1, 3])
def test_one_possible_collision(r, light):
    config = Configuration((r,) + (1,) * light)
    n = config.n
    forms = ex.closed_forms(config, r)
    assert forms.K1 == F(r * (n + 1), r + 1)
    assert forms.K1 == ex.expectation_exact(config, r, "K1")
    assert forms.K2 == ex.expectation_exact(config, r, "K2")


def test_closed_forms_match_exact_when_they_apply():
    seen = set()
    for sizes in [(2, 2, 1), (3, 3, 3, 2, 1), (2,) * 6, (4, 1, 1, 1), (7, 2), (3, 3), (5, 4, 4)]:
        for r in (2, 3, 4):
            config = Configuration(sizes)
            forms = ex.closed_forms(config, r)
            if forms is None:
                continue
            seen.add(forms.shape)
            assert forms.K1 == ex.expectation_exact(config, r, "K1")
            assert forms.K2 == ex.expectation_exact(config, r, "K2")
    assert seen == {"single", "capped"}


def test_naive_capped_K2_form_fails_for_one_collision():
    # sum_{i<r} B(i/r, a+1) at a = 1 against the exact value
    config = Configuration((2, 1))
    naive = config.n / 2 * special.beta(0.5, 2)
    assert abs(naive - float(ex.expectation_exact(config, 2, "K2"))) > 0.1


def test_lower_bound_examples():
    low = ex.bounds_lower(ex.config_statistics(HAND, 2))
    assert low["K1_beta"] == pytest.approx(8 / 3, rel=1e-12)
    assert low["K2"] == pytest.approx(math.gamma(1.5) * 4 / math.sqrt(2), rel=1e-14)
    assert low["K2"] == pytest.approx(2.5066, abs=1e-4)
    assert low["R"] == pytest.approx(1.7725, abs=1e-4)
    assert low["K1_gamma"] < low["K1_beta"]


def test_majorization_examples():
    up = ex.bounds_upper_majorization(ex.config_statistics(HAND, 2))
    assert up["R"] == pytest.approx(2.5, abs=1e-9)
    assert up["K1"] >= 8 / 3 - 1e-9
    skew = Configuration((3, 1))
    up = ex.bounds_upper_majorization(ex.config_statistics(skew, 2))
    assert up["R"] == pytest.approx(2.5, abs=1e-9)
    assert float(ex.expectation_exact(skew, 2, "R")) < 2.5


def test_matched_examples():
    up = ex.bounds_upper_matched(ex.config_statistics(HAND, 2))
    expected = 4 / math.sqrt(2) * (math.gamma(0.5) / 2 + 2 * math.gamma(1.0) / (2 * math.sqrt(2)))
    assert up["K12"] == pytest.approx(expected, rel=1e-14)
    assert up["K12"] == pytest.approx(4.506, abs=1e-3)
    assert up["R"] >= 2.5


@pytest.mark.parametrize("m", [10, 100, 365, 2000])
def test_classical_repetition_within_one_of_root(m):
    config = Configuration.classical(m)
    stats = ex.config_statistics(config, 2)
    value = float(ex.expectation_exact(config, 2, "R"))
    gap = value - math.sqrt(math.pi * m / 2)
    assert 0 < gap < 1
    assert ex.bounds_lower(stats)["R"] < value < ex.bounds_upper_matched(stats)["R"]


def _sandwich_failures(battery):
    failures = []
    for config, r in battery:
        stats = ex.config_statistics(config, r)
        low, maj, mat = (ex.bounds_lower(stats), ex.bounds_upper_majorization(stats),
                         ex.bounds_upper_matched(stats))
        e1, e2, er = (float(ex.expectation_exact(config, r, m)) for m in ("K1", "K2", "R"))
        checks = [
            low["K1_gamma"] < low["K1_beta"] <= e1 * (1 + 1e-12),
            low["K2"] < e2,
            low["R"] < er,
            e1 <= e2 < mat["K12"],
            er < mat["R"],
            er < mat["R_factorial_weights"],
            er <= maj["R"] * (1 + 1e-9),
            e1 <= maj["K1"] * (1 + 1e-9),
            e2 <= maj["K2"] * (1 + 1e-9),
            e2 - e1 < ex.gap_bound(stats)["bound"],
        ]
        if not all(checks):
            failures.append((config.sizes, r, checks))
    return failures


def test_bound_sandwich_on_battery():
    assert _sandwich_failures(BATTERY) == []


def test_expectation_bounds_record():
    rec = ex.expectation_bounds(HAND, 2, "K1")
    # (2, 2) attains the Beta lower bound, so allow rounding at equality
    assert rec.lower <= 8 / 3 * (1 + 1e-12) and 8 / 3 <= rec.upper_matched
    assert rec.lower <= rec.upper_majorization * (1 + 1e-12)
    assert "Beta" in rec.method_notes
    rec = ex.expectation_bounds(Configuration((1, 1, 1)), 2, "R")
    assert rec.lower < ex.expectation_exact(Configuration((1, 1, 1)), 2, "R") == F(26, 9)
    assert rec.upper_matched > F(26, 9)
    with pytest.raises(InvalidQueryError):
        ex.expectation_bounds(Configuration((1, 1, 1)), 2, "K1")


def test_gap_constant():
    by_hand = 0.5 * sp_integrate.quad(lambda t: t * math.exp(-t / 2) * math.sqrt(1 + t), 0, math.inf)[0]
    assert ex.gap_constant(2) == pytest.approx(by_hand, rel=1e-10)
    assert ex.gap_constant(2) >= 2
    g = ex.gap_bound(ex.config_statistics(HAND, 2))
    assert g["bound"] == pytest.approx(2 * by_hand, rel=1e-10)
    assert 1 < g["bound"]
    for r in (3, 4, 5):
        assert ex.gap_constant(r) > 0


@pytest.mark.parametrize("n", [3, 10, 50])
def test_gap_for_constant_map(n):
    config = Configuration((n,))
    gap = ex.expectation_exact(config, 2, "K2") - ex.expectation_exact(config, 2, "K1")
    assert gap == F(1, n - 1)
    assert 0 < gap < ex.gap_bound(ex.config_statistics(config, 2))["bound"]


def test_split_bounds_examples():
    assert ex.true_collision_split_bounds(HAND) == {"lower": F(1, 2), "upper": F(1, 2)}
    assert ex.true_collision_split_bounds(Configuration((3, 1))) == {"lower": F(2, 5), "upper": F(1, 2)}
    assert ex.true_collision_split_bounds(Configuration((7,))) == {"lower": F(1, 7), "upper": F(1, 7)}


@pytest.mark.parametrize("sizes", [(2, 2), (3, 1), (3, 3, 3), (5, 2, 1), (6, 1, 1, 1, 1)])
def test_split_bounds_bracket_exact_and_simulated(sizes):
    config = Configuration(sizes)
    b = ex.true_collision_split_bounds(config)
    exact = 1 - ed.prob_true_collision_first(config, 2).p_overall
    assert float(b["lower"]) - 1e-9 <= exact <= float(b["upper"]) + 1e-9
    if len(set(sizes)) == 1:
        assert b["lower"] == b["upper"]
        assert exact == pytest.approx(float(b["lower"]), abs=1e-9)
    sim = simulate_waiting_times(config, 2, "K2", 100_000, seed=3).extras["fraction_R_less_than_K"]
    se = math.sqrt(exact * (1 - exact) / 100_000)
    assert abs(sim - exact) <= 4 * se + 1e-12
    assert float(b["lower"]) - 4 * se <= sim <= float(b["upper"]) + 4 * se


@pytest.mark.parametrize("sizes,r", [((2, 2), 2), ((5, 3, 3, 1), 3), ((4, 4, 2, 1, 1), 2), ((1,) * 50, 2)])
def test_simulated_means_within_four_standard_errors(sizes, r):
    config = Configuration(sizes)
    modes = ("K1", "K2", "R") if config.max_size() >= r else ("R",)
    for mode in modes:
        rep = simulate_waiting_times(config, r, mode, 100_000, seed=17)
        exact = float(ex.expectation_exact(config, r, mode))
        assert abs(rep.mean - exact) <= 4 * rep.stderr
