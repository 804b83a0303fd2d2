"""Shared fixtures: seeded configuration batteries and small enumerations."""
from __future__ import annotations

import random

from collision_lab import Configuration


def random_battery(count: int = 200, seed: int = 20240601, n_max: int = 60, m_max: int = 20):
    """``count`` pairs ``(config, r)`` with ``r`` in {2, 3} and some cell of size >= r."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        r = rng.choice((2, 3))
        m = rng.randint(1, m_max)
        n = rng.randint(r, n_max)
        weights = [rng.random() ** rng.choice((1, 2, 4)) for _ in range(m)]
        sizes = [0] * m
        for cell in rng.choices(range(m), weights=weights, k=n):
            sizes[cell] += 1
        if max(sizes) < r:
            continue
        out.append((Configuration(tuple(sizes)), r))
    return out


def partitions(n: int, max_parts: int | None = None):
    """Partitions of ``n`` as nonincreasing tuples with at most ``max_parts`` parts."""
    max_parts = n if max_parts is None else max_parts

    def rec(left, cap, parts):
        if left == 0:
            yield ()
            return
        if parts == 0:
            return
        for x in range(min(left, cap), 0, -1):
            for rest in rec(left - x, x, parts - 1):
                yield (x,) + rest

    yield from rec(n, n, max_parts)


def small_configs(n_max: int, max_parts: int | None = None):
    for n in range(1, n_max + 1):
        for p in partitions(n, max_parts):
            yield Configuration(p)
