import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_battery, small_configs
from collision_lab import Configuration, DomainError, InvalidQueryError, MultinomialModel
from collision_lab import exact_dist as ed
from collision_lab.kernels import elementary_symmetric, falling_factorial
from collision_lab.montecarlo import brute_force_survival, brute_force_true_collision

F = Fraction
HAND = Configuration((2, 2))

configs = st.lists(st.integers(0, 7), min_size=1, max_size=6).filter(lambda s: sum(s) > 0).map(
    lambda s: Configuration(tuple(s)))


def test_hand_values():
    assert ed.survival_K1(HAND, 2, 2) == F(2, 3)
    assert ed.survival_K1(HAND, 2, 1) == 1
    assert ed.survival_K1(Configuration((2, 1, 0)), 2, 2) == F(2, 3)
    assert ed.survival_K2(HAND, 2, 2) == F(3, 4)
    assert ed.survival_K2(HAND, 2, 3) == F(7, 16)
    assert ed.survival_R(HAND, 2, 2) == F(1, 2)
    assert ed.survival_R(HAND, 2, 3) == 0


@given(configs, st.integers(2, 4))
def test_zero_draws_survive(config, r):
    assert ed.survival_R(config, r, 0) == 1
    if config.max_size() >= r:
        assert ed.survival_K1(config, r, 0) == 1
        assert ed.survival_K2(config, r, 0) == 1


def test_no_heavy_cell_is_rejected():
    config = Configuration((1, 1, 1))
    for fn in (ed.survival_K1, ed.survival_K2):
        with pytest.raises(InvalidQueryError):
            fn(config, 2, 1)
    with pytest.raises(InvalidQueryError):
        ed.survival_table(config, 2, "K1")
    assert ed.survival_R(config, 2, 2) == F(2, 3)


def test_bad_arguments():
    with pytest.raises(DomainError):
        ed.survival_K1(HAND, 1, 2)
    with pytest.raises(DomainError):
        ed.survival_R(HAND, 2, -1)
    with pytest.raises(DomainError):
        ed.survival_table(HAND, 2, "K3")


@pytest.mark.parametrize("m", [1, 5, 23, 60])
def test_classical_repetition(m):
    table = ed.survival_table(Configuration.classical(m), 2, "R")
    for k in range(m + 2):
        expected = F(falling_factorial(m, k), m**k) if k <= m else 0
        assert table[k] == expected


@given(configs, st.integers(0, 10))
def test_pairs_reduce_to_elementary_symmetric(config, k):
    n = config.n
    sym = elementary_symmetric(config.sizes, k)[k]
    assert ed.survival_R(config, 2, k) == math.factorial(k) * sym / F(n) ** k
    if config.max_size() >= 2:
        expected = F(math.factorial(k) * math.factorial(n - k), math.factorial(n)) * sym if k <= n else 0
        assert ed.survival_K1(config, 2, k) == expected


@given(configs, st.integers(0, 12))
def test_pair_bridge(config, k):
    if config.max_size() < 2 or k > config.n:
        return
    n = config.n
    assert ed.survival_R(config, 2, k) == F(falling_factorial(n, k), n**k) * ed.survival_K1(config, 2, k)


@given(configs, st.integers(2, 4), st.integers(0, 12))
@settings(max_examples=60)
def test_two_routes_for_K2(config, r, k):
    if config.max_size() < r:
        return
    assert ed.survival_K2(config, r, k) == ed.survival_K2_surjection(config, r, k)


@given(configs, st.integers(2, 4))
@settings(max_examples=60)
def test_tables_match_pointwise(config, r):
    rep = ed.survival_table(config, r, "R")
    assert list(rep.entries) == [ed.survival_R(config, r, k) for k in range(len(rep))]
    if config.max_size() >= r:
        k1 = ed.survival_table(config, r, "K1")
        assert list(k1.entries) == [ed.survival_K1(config, r, k) for k in range(len(k1))]
        k2 = ed.survival_table(config, r, "K2", k_max=12)
        assert list(k2.entries) == [ed.survival_K2(config, r, k) for k in range(13)]


@given(configs, st.integers(2, 4))
@settings(max_examples=60)
def test_table_invariants(config, r):
    modes = ["R"] + (["K1", "K2"] if config.max_size() >= r else [])
    for mode in modes:
        entries = ed.survival_table(config, r, mode, k_max=config.n + 3).entries
        assert entries[0] == 1
        assert all(0 <= p <= 1 for p in entries)
        assert all(a >= b for a, b in zip(entries, entries[1:]))
        if mode == "K1":
            assert all(p == 0 for p in entries[config.n + 1:])
        if mode == "K2" and config.n >= 2:
            assert all(p > 0 for p in entries)
        if mode == "R":
            # r-1 draws per occupied colour at most
            cut = (r - 1) * config.occupied()
            assert all(p == 0 for p in entries[cut + 1:])
            if r == 2:
                assert all(p == 0 for p in entries[config.n + 1:])


def test_repetition_outlives_n_for_larger_orders():
    config = Configuration.classical(3)
    assert ed.survival_R(config, 3, 4) > 0
    assert ed.survival_R(config, 3, 6) > 0
    assert ed.survival_R(config, 3, 7) == 0


def test_stochastic_ordering_on_battery():
    for config, r in random_battery(60, seed=7, n_max=40):
        k_max = config.n + 2
        k1 = ed.survival_table(config, r, "K1", k_max=k_max).entries
        k2 = ed.survival_table(config, r, "K2", k_max=k_max).entries
        rep = ed.survival_table(config, r, "R", k_max=k_max).entries
        for k in range(k_max + 1):
            assert k2[k] >= k1[k]
            assert k2[k] >= rep[k]
            if r == 2:
                assert k1[k] >= rep[k]


def _transfers(sizes, low):
    for i, j in itertools.permutations(range(len(sizes)), 2):
        if low <= sizes[i] < sizes[j] - 1:
            new = list(sizes)
            new[i] += 1
            new[j] -= 1
            yield tuple(new)


@pytest.mark.parametrize("r", [2, 3])
def test_balancing_transfer_never_shortens_waiting(r):
    for config in small_configs(9, 4):
        k_max = config.n + 2
        if config.max_size() >= r:
            k1 = ed.survival_table(config, r, "K1", k_max=k_max).entries
            k2 = ed.survival_table(config, r, "K2", k_max=k_max).entries
            for sizes in _transfers(config.sizes, r):
                other = Configuration(sizes)
                assert all(a <= b for a, b in zip(k1, ed.survival_table(other, r, "K1", k_max=k_max).entries))
                assert all(a <= b for a, b in zip(k2, ed.survival_table(other, r, "K2", k_max=k_max).entries))
        rep = ed.survival_table(config, r, "R", k_max=k_max).entries
        for sizes in _transfers(config.sizes + (0,), 0):
            other = Configuration(sizes)
            assert all(a <= b for a, b in zip(rep, ed.survival_table(other, r, "R", k_max=k_max).entries))


@pytest.mark.parametrize("r", [3, 4, 5])
def test_no_ordering_between_collision_and_repetition(r):
    config = Configuration((1, r))
    n = r + 1
    p_k1 = ed.survival_K1(config, r, r - 1) - ed.survival_K1(config, r, r)
    p_rep = ed.survival_R(config, r, r - 1) - ed.survival_R(config, r, r)
    assert p_k1 == F(1, r + 1)
    assert p_rep == F(1 + r**r, (r + 1) ** r)
    assert p_k1 < p_rep
    assert ed.survival_K1(config, r, r + 1) == 0 < ed.survival_R(config, r, r + 1)
    assert n == config.n


@pytest.mark.parametrize("r", [2, 3])
def test_exhaustive_oracle_up_to_seven_balls(r):
    for config in small_configs(7):
        k_max = min(config.n + 2, 8)
        for mode in ("K1", "K2", "R"):
            if mode != "R" and config.max_size() < r:
                continue
            exact = ed.survival_table(config, r, mode, k_max=k_max).entries
            assert exact == brute_force_survival(config, r, mode, k_max).entries, (config, mode)


def test_multinomial_examples():
    half = MultinomialModel(2, (F(1, 2), F(1, 2)))
    assert ed.survival_K1_multinomial(half, 2, 2) == F(1, 2)
    single = MultinomialModel(3, (F(1),))
    assert ed.survival_K1_multinomial(single, 2, 2) == 0
    uniform = MultinomialModel.uniform(7, 7)
    for k in range(8):
        assert ed.survival_K1_multinomial(uniform, 2, k) == F(falling_factorial(7, k), 7**k)
    with pytest.raises(DomainError):
        ed.survival_K1_multinomial(half, 2, 3)
    with pytest.raises(InvalidQueryError):
        ed.survival_K1_multinomial(MultinomialModel(2, (F(1),)), 3, 1)


@given(configs, st.integers(2, 4))
@settings(max_examples=50)
def test_multinomial_matches_fixed_repetition(config, r):
    if config.n < r:
        return
    model = MultinomialModel.from_configuration(config)
    for k in range(config.n + 1):
        assert ed.survival_K1_multinomial(model, r, k) == ed.survival_R(config, r, k)


def test_multinomial_by_two_stage_enumeration():
    # average the fixed-configuration law over every colouring of the balls
    probs = (F(1, 2), F(1, 3), F(1, 6))
    n, r = 4, 2
    model = MultinomialModel(n, probs)
    for k in range(n + 1):
        total = F(0)
        for colours in itertools.product(range(3), repeat=n):
            weight = math.prod(probs[c] for c in colours)
            config = Configuration(tuple(colours.count(i) for i in range(3)))
            if config.max_size() >= r:
                total += weight * ed.survival_K1(config, r, k)
            else:
                total += weight
        assert ed.survival_K1_multinomial(model, r, k) == total
        assert ed.survival_K2_multinomial(model, r, k) == sum(
            (ed.survival_K1_multinomial(model, r, d) * p
             for d, p in enumerate(ed.image_cardinality_pmf(k, n))), F(0))


def test_expected_counts_examples():
    counts = ed.expected_collision_counts(HAND, 2, 2)
    assert counts.ES1 == F(1, 3)
    assert counts.ES2multi == F(1, 4)
    for r in (2, 3):
        c = ed.expected_collision_counts(Configuration((3, 2, 1)), r, r - 1)
        assert c.ES1 == c.EC == c.ES2 == c.ES2multi == 0


@pytest.mark.parametrize("sizes", [(2, 2), (3, 1), (2, 1, 1)])
@pytest.mark.parametrize("r", [2, 3])
@pytest.mark.parametrize("k", [0, 2, 3, 4])
def test_expected_counts_by_enumeration(sizes, r, k):
    config = Configuration(sizes)
    n = config.n
    colour = [i for i, x in enumerate(sizes) for _ in range(x)]
    sets_same_colour = lambda balls: sum(
        1 for a in itertools.combinations(sorted(set(balls)), r) if len({colour[b] for b in a}) == 1)
    got = ed.expected_collision_counts(config, r, k)
    if k <= n:
        seqs = list(itertools.permutations(range(n), k))
        assert got.ES1 == F(sum(sets_same_colour(s) for s in seqs), len(seqs))
    seqs = list(itertools.product(range(n), repeat=k))
    assert got.ES2 == F(sum(sets_same_colour(s) for s in seqs), len(seqs))
    multi = sum(1 for s in seqs for a in itertools.combinations(range(k), r)
                if len({s[i] for i in a}) == r and len({colour[s[i]] for i in a}) == 1)
    assert got.ES2multi == F(multi, len(seqs))
    rep = sum(1 for s in seqs for a in itertools.combinations(range(k), r)
              if len({colour[s[i]] for i in a}) == 1)
    assert got.EC == F(rep, len(seqs))


def test_true_collision_examples():
    rep = ed.prob_true_collision_first(HAND, 2)
    assert rep.conditional == (F(1, 2), F(1, 2))
    assert rep.p_overall == pytest.approx(0.5, abs=1e-10)
    single = ed.prob_true_collision_first(Configuration((5,)), 2)
    assert single.conditional == (F(4, 5),)
    assert single.p_overall == pytest.approx(0.8, abs=1e-10)
    mixed = ed.prob_true_collision_first(Configuration((3, 2)), 2)
    assert mixed.lower == F(1, 2) and mixed.upper == F(2, 3)
    assert mixed.lower <= mixed.p_overall <= mixed.upper


@pytest.mark.parametrize("sizes,r", [((3, 2), 2), ((2, 2, 1), 2), ((4, 1, 1), 2), ((3, 3), 3), ((4, 2), 3)])
def test_true_collision_against_enumeration(sizes, r):
    config = Configuration(sizes)
    rep = ed.prob_true_collision_first(config, r)
    assert rep.p_overall == pytest.approx(float(brute_force_true_collision(config, r)), abs=1e-9)
    assert float(rep.lower) - 1e-10 <= rep.p_overall <= float(rep.upper) + 1e-10


@pytest.mark.parametrize("sizes,r", [((2, 2), 2), ((5, 3, 3, 1), 3), ((9, 4, 1, 1, 0), 2), ((20,) * 3, 4)])
def test_float_path_agrees_with_exact(sizes, r):
    config = Configuration(sizes)
    for mode in ("K1", "K2", "R"):
        exact = ed.survival_table(config, r, mode, k_max=config.n + 4, exact=True)
        approx = ed.survival_table(config, r, mode, k_max=config.n + 4, exact=False)
        assert not approx.exact and exact.exact
        for a, b in zip(exact.entries, approx.entries):
            assert b == pytest.approx(float(a), rel=1e-10, abs=1e-300)
        assert ed.survival(config, r, mode, 3, exact=False) == pytest.approx(float(exact[3]), rel=1e-10)


def test_large_configurations_use_floats():
    config = Configuration((3,) * 4000)
    assert config.n > ed.EXACT_MAX_N
    table = ed.survival_table(config, 2, "K1", k_max=300)
    assert not table.exact and isinstance(table[10], float)
    assert all(a >= b for a, b in zip(table.entries, table.entries[1:]))


def test_light_cells_pull_true_collision_below_heavy_minimum():
    # colour 2 of (4, 2) can be hit three times without a true 3-collision
    config = Configuration((4, 2))
    rep = ed.prob_true_collision_first(config, 3)
    heavy_min = F(falling_factorial(4, 3), 4**3)
    assert rep.p_overall < float(heavy_min)
    assert rep.lower == 0 and rep.upper == heavy_min
    assert rep.p_overall == pytest.approx(float(brute_force_true_collision(config, 3)), abs=1e-9)


def test_true_collision_sandwich_when_all_cells_heavy():
    for config, r in random_battery(40, seed=11, n_max=40):
        heavy = Configuration(tuple(x for x in config.sizes if x >= r))
        rep = ed.prob_true_collision_first(heavy, r)
        ell = min(heavy.sizes)
        big = max(heavy.sizes)
        assert rep.lower == F(falling_factorial(ell, r), ell**r)
        assert rep.upper == F(falling_factorial(big, r), big**r)
        assert float(rep.lower) - 1e-9 <= rep.p_overall <= float(rep.upper) + 1e-9
