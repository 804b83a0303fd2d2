"""Simulation and exhaustive-enumeration oracles.

Simulations draw from an urn holding ``x_i`` balls of colour ``i``.  Trials
are split into fixed-size chunks; chunk ``j`` uses the ``j``-th child of
``SeedSequence(seed)``, so results depend only on the seed and never on the
number of worker threads.
"""
from __future__ import annotations

import os
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, perm, prod

import numpy as np

from .configuration import Configuration, MultinomialModel, check_order
from .errors import DomainError, InvalidQueryError, ResourceError
from .exact_dist import SurvivalTable, _check_mode

__all__ = [
    "SimulationReport",
    "FixedIndegreeDistribution",
    "BRUTE_FORCE_LIMIT",
    "ENUMERATION_LIMIT",
    "simulate_waiting_times",
    "simulate_two_stage",
    "simulate_cell_counts",
    "brute_force_survival",
    "brute_force_true_collision",
    "enumerate_fixed_indegree",
    "sample_fixed_indegree",
    "cyclic_points",
    "rho_length",
    "multiset_permutations",
]

BRUTE_FORCE_LIMIT = 10**7
ENUMERATION_LIMIT = 10**6

# cells of the trial-by-ball work arrays allowed per chunk
_CHUNK_CELLS = 4_000_000
_MAX_CHUNK = 4096


def _threads() -> int:
    raw = os.environ.get("COLLISION_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"COLLISION_LAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


@dataclass(frozen=True)
class SimulationReport:
    mode: str
    r: int
    trials: int
    seed: int
    mean: float
    stderr: float
    empirical_survival: list
    extras: dict = field(default_factory=dict)

    def survival_at(self, k: int) -> float:
        return self.empirical_survival[k][1] if k < len(self.empirical_survival) else 0.0


# --------------------------------------------------------------------------
# vectorized urn engine
# --------------------------------------------------------------------------

def _run_chunk(colours: np.ndarray, m: int, r: int, mode: str, rng: np.random.Generator,
               count: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Waiting times of ``count`` trials.

    ``colours`` is either one ball-to-colour table shared by all trials or a
    ``(count, n)`` array with one table per trial.  For ``K2`` the repetition
    time of each trial is returned as well.
    """
    n = colours.shape[-1]
    per_trial = colours.ndim == 2
    rows = np.arange(count)
    times = np.zeros(count, dtype=np.int64)
    rep_times = np.zeros(count, dtype=np.int64) if mode == "K2" else None
    distinct = np.zeros((count, m), dtype=np.int32)
    draws = np.zeros((count, m), dtype=np.int32) if mode != "K1" else None
    seen = np.zeros((count, n), dtype=bool) if mode == "K2" else None
    order = np.tile(np.arange(n), (count, 1)) if mode == "K1" else None
    active = rows.copy()
    k = 0
    while active.size:
        k += 1
        if mode == "K1":
            pick = rng.integers(k - 1, n, size=active.size)
            a = order[active, k - 1].copy()
            order[active, k - 1] = order[active, pick]
            order[active, pick] = a
            balls = order[active, k - 1]
        else:
            balls = rng.integers(0, n, size=active.size)
        col = colours[active, balls] if per_trial else colours[balls]
        if mode == "K1":
            distinct[active, col] += 1
            hit = distinct[active, col] >= r
        elif mode == "R":
            draws[active, col] += 1
            hit = draws[active, col] >= r
        else:
            new = ~seen[active, balls]
            seen[active, balls] = True
            distinct[active, col] += new
            draws[active, col] += 1
            first_rep = (draws[active, col] >= r) & (rep_times[active] == 0)
            rep_times[active[first_rep]] = k
            hit = distinct[active, col] >= r
        times[active[hit]] = k
        active = active[~hit]
        if mode == "K1" and k == n and active.size:
            # every ball drawn without an r-collision: censor at n + 1
            times[active] = n + 1
            break
    return times, rep_times


def _chunks(trials: int, width: int) -> list[int]:
    size = max(1, min(_MAX_CHUNK, _CHUNK_CELLS // max(1, width)))
    full, rem = divmod(trials, size)
    return [size] * full + ([rem] if rem else [])


def _report(mode: str, r: int, trials: int, seed: int, times: np.ndarray,
            rep_times: np.ndarray | None) -> SimulationReport:
    top = int(times.max())
    hist = np.bincount(times, minlength=top + 1)
    # fraction of trials with waiting time > k
    above = trials - np.cumsum(hist)
    surv = [(k, float(above[k] / trials)) for k in range(top + 1)]
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    extras = {}
    if rep_times is not None:
        extras["fraction_K_equals_R"] = float(np.mean(rep_times == times))
        extras["fraction_R_less_than_K"] = float(np.mean(rep_times < times))
        extras["mean_R"] = float(rep_times.mean())
    return SimulationReport(mode, r, trials, int(seed), mean, stderr, surv, extras)


def _check_trials(trials, seed):
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials!r}")
    if isinstance(seed, bool) or int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(trials), int(seed)


def _run_parallel(job, sizes: list[int], seed: int):
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = [(np.random.default_rng(child), size) for child, size in zip(children, sizes)]
    threads = min(_threads(), len(tasks))
    if threads == 1:
        return [job(rng, size) for rng, size in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: job(*t), tasks))


def _merge(parts):
    times = np.concatenate([p[0] for p in parts])
    reps = None if parts[0][1] is None else np.concatenate([p[1] for p in parts])
    return times, reps


def simulate_waiting_times(config: Configuration, r: int, mode: str, trials: int,
                           seed: int = 0) -> SimulationReport:
    """Monte Carlo estimate of the law of ``K1``, ``K2`` or ``R``.

    For ``K2`` the extras report how often the first r-hit with replacement
    is a true collision (``K = R``) and how often a repetition comes first.
    """
    r, mode = check_order(r), _check_mode(mode)
    trials, seed = _check_trials(trials, seed)
    if mode != "R":
        config.require_collisions(r)
    colours = np.repeat(np.arange(config.m), config.sizes)

    def job(rng, size):
        return _run_chunk(colours, config.m, r, mode, rng, size)

    parts = _run_parallel(job, _chunks(trials, config.n + config.m), seed)
    return _report(mode, r, trials, seed, *_merge(parts))


def simulate_two_stage(model: MultinomialModel, r: int, mode: str, trials: int,
                       seed: int = 0) -> SimulationReport:
    """Each trial draws a multinomial configuration, then runs the urn.

    Without replacement a trial whose configuration has no r-heavy cell
    reports ``n + 1``; ``extras["censored_trials"]`` counts them, and the
    empirical survival is exact in law for ``k <= n``.
    """
    r, mode = check_order(r), _check_mode(mode)
    trials, seed = _check_trials(trials, seed)
    if model.n < r:
        raise InvalidQueryError(f"with n = {model.n} < r no cell can hold {r} balls")
    probs = np.array([float(p) for p in model.probs])
    n, m = model.n, model.m

    def job(rng, size):
        sizes = rng.multinomial(n, probs, size=size)
        colours = np.stack([np.repeat(np.arange(m), row) for row in sizes])
        # with replacement a configuration without an r-heavy cell never
        # collides; without replacement such trials are censored at n + 1
        if mode == "K2" and (sizes.max(axis=1) < r).any():
            raise InvalidQueryError("a sampled configuration has no cell with r balls; "
                                    "the collision time with replacement is infinite")
        return _run_chunk(colours, m, r, mode, rng, size)

    parts = _run_parallel(job, _chunks(trials, n + m), seed)
    report = _report(mode, r, trials, seed, *_merge(parts))
    if mode == "K1":
        report.extras["censored_trials"] = int(round(report.survival_at(n) * trials))
    return report


def simulate_cell_counts(k: int, m: int, trials: int, seed: int = 0) -> dict:
    """Mean and standard error of the number of cells holding exactly ``j``
    balls after ``k`` uniform draws into ``m`` cells, for ``j = 0..k``."""
    trials, seed = _check_trials(trials, seed)
    if k < 0 or m < 1:
        raise DomainError("need k >= 0 and m >= 1")

    def job(rng, size):
        cells = rng.integers(0, m, size=(size, k))
        occ = np.zeros((size, m), dtype=np.int64)
        np.add.at(occ, (np.arange(size)[:, None], cells), 1)
        return np.stack([(occ == j).sum(axis=1) for j in range(k + 1)], axis=1), None

    parts = _run_parallel(job, _chunks(trials, k + m), seed)
    counts = np.concatenate([p[0] for p in parts])
    return {"mean": counts.mean(axis=0), "stderr": counts.std(axis=0, ddof=1) / np.sqrt(trials)}


# --------------------------------------------------------------------------
# exhaustive oracles
# --------------------------------------------------------------------------

def _ball_colours(config: Configuration) -> list[int]:
    return [i for i, x in enumerate(config.sizes) for _ in range(x)]


def brute_force_survival(config: Configuration, r: int, mode: str, k_max: int) -> SurvivalTable:
    """Exact ``P(T > k)`` for ``k = 0..k_max`` by counting draw sequences.

    Sequences that share a future (same balls drawn, or same colour counts)
    are merged, but every ordered sequence is counted with its multiplicity.
    """
    r, mode = check_order(r), _check_mode(mode)
    n = config.n
    if k_max < 0:
        raise DomainError("k_max must be nonnegative")
    total = perm(n, min(k_max, n)) if mode == "K1" else n**k_max
    if total > BRUTE_FORCE_LIMIT:
        raise ResourceError(f"{total} draw sequences exceed the enumeration limit {BRUTE_FORCE_LIMIT}")
    if mode != "R":
        config.require_collisions(r)
    colour = _ball_colours(config)
    m = config.m
    entries = [Fraction(1)]
    if mode == "R":
        states = {(0,) * m: 1}
        for k in range(1, k_max + 1):
            nxt: dict = defaultdict(int)
            for counts, ways in states.items():
                for b in range(n):
                    c = colour[b]
                    if counts[c] + 1 < r:
                        key = counts[:c] + (counts[c] + 1,) + counts[c + 1:]
                        nxt[key] += ways
            states = nxt
            entries.append(Fraction(sum(states.values()), n**k))
        return SurvivalTable("R", r, tuple(entries), True)
    # states: bitmask of balls drawn (K1) or seen (K2) -> number of sequences
    states = {0: 1}
    for k in range(1, k_max + 1):
        nxt = defaultdict(int)
        for mask, ways in states.items():
            for b in range(n):
                bit = 1 << b
                if mask & bit:
                    if mode == "K2":
                        nxt[mask] += ways
                    continue
                c = colour[b]
                have = sum(1 for j in range(n) if mask >> j & 1 and colour[j] == c)
                if have + 1 < r:
                    nxt[mask | bit] += ways
        states = nxt
        den = perm(n, k) if mode == "K1" else n**k
        entries.append(Fraction(sum(states.values()), den) if den else Fraction(0))
    return SurvivalTable(mode, r, tuple(entries), True)


def brute_force_true_collision(config: Configuration, r: int) -> Fraction:
    """Exact ``P(K2 = R)`` by following every draw sequence until the first
    colour is drawn ``r`` times."""
    r = check_order(r)
    config.require_collisions(r)
    n = config.n
    horizon = (r - 1) * config.occupied() + 1
    if n**horizon > BRUTE_FORCE_LIMIT:
        raise ResourceError(f"{n}^{horizon} draw sequences exceed the enumeration limit")
    colour = _ball_colours(config)
    states = {(0, (0,) * config.m): 1}
    hits = Fraction(0)
    for k in range(1, horizon + 1):
        nxt: dict = defaultdict(int)
        done = 0
        for (mask, draws), ways in states.items():
            for b in range(n):
                c = colour[b]
                new_mask = mask | (1 << b)
                new_draws = draws[:c] + (draws[c] + 1,) + draws[c + 1:]
                if new_draws[c] == r:
                    distinct = sum(1 for j in range(n) if new_mask >> j & 1 and colour[j] == c)
                    if distinct == r:
                        done += ways
                else:
                    nxt[(new_mask, new_draws)] += ways
        hits += Fraction(done, n**k)
        states = nxt
    return hits


# --------------------------------------------------------------------------
# mappings with a fixed configuration
# --------------------------------------------------------------------------

def multiset_permutations(items) -> "iterator":
    """Distinct orderings of ``items`` in lexicographic order."""
    seq = sorted(items)
    size = len(seq)
    while True:
        yield tuple(seq)
        i = size - 2
        while i >= 0 and seq[i] >= seq[i + 1]:
            i -= 1
        if i < 0:
            return
        j = size - 1
        while seq[j] <= seq[i]:
            j -= 1
        seq[i], seq[j] = seq[j], seq[i]
        seq[i + 1:] = reversed(seq[i + 1:])


def cyclic_points(f) -> int:
    """Number of points lying on a cycle of the mapping ``i -> f[i]``."""
    n = len(f)
    state = [0] * n  # 0 new, 1 on current path, 2 finished
    cyclic = 0
    for start in range(n):
        path = []
        x = start
        while state[x] == 0:
            state[x] = 1
            path.append(x)
            x = f[x]
        if state[x] == 1:
            cyclic += len(path) - path.index(x)
        for y in path:
            state[y] = 2
    return cyclic


def rho_length(f, x: int) -> int:
    """Number of distinct points on the trajectory ``x, f(x), f(f(x)), ...``."""
    seen = set()
    while x not in seen:
        seen.add(x)
        x = f[x]
    return len(seen)


def _padded(config: Configuration) -> tuple[int, ...]:
    if config.m > config.n:
        trailing = config.sizes[config.n:]
        if any(trailing):
            raise DomainError("a mapping of [n] into itself needs m <= n image points")
        return config.sizes[:config.n]
    return config.sizes + (0,) * (config.n - config.m)


@dataclass(frozen=True)
class FixedIndegreeDistribution:
    """Exact laws over the uniform mapping with prescribed preimage sizes."""

    Z_distribution: dict
    rho_distribution: dict
    mappings: int

    def Z_survival(self, k: int) -> Fraction:
        return sum((p for z, p in self.Z_distribution.items() if z > k), Fraction(0))

    def rho_survival(self, k: int) -> Fraction:
        return sum((p for v, p in self.rho_distribution.items() if v > k), Fraction(0))


def enumerate_fixed_indegree(config: Configuration) -> FixedIndegreeDistribution:
    """Cyclic-point and rho-length laws by listing every mapping of ``[n]``
    into itself whose value ``i`` occurs exactly ``x_i`` times."""
    sizes = _padded(config)
    n = config.n
    count = factorial(n) // prod(factorial(x) for x in sizes)
    if count > ENUMERATION_LIMIT:
        raise ResourceError(f"{count} mappings exceed the enumeration limit {ENUMERATION_LIMIT}")
    values = [i for i, x in enumerate(sizes) for _ in range(x)]
    z_counts: Counter = Counter()
    rho_counts: Counter = Counter()
    for f in multiset_permutations(values):
        z_counts[cyclic_points(f)] += 1
        for x in range(n):
            rho_counts[rho_length(f, x)] += 1
    z = {k: Fraction(v, count) for k, v in sorted(z_counts.items())}
    rho = {k: Fraction(v, count * n) for k, v in sorted(rho_counts.items())}
    return FixedIndegreeDistribution(z, rho, count)


def sample_fixed_indegree(config: Configuration, seed: int = 0) -> list[int]:
    """A uniform mapping with the given preimage sizes (a shuffled value list)."""
    sizes = _padded(config)
    values = np.repeat(np.arange(len(sizes)), sizes)
    return np.random.default_rng(seed).permutation(values).tolist()
