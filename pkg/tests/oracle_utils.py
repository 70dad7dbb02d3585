"""Brute-force oracles shared by the unit and acceptance suites."""

import itertools

import numpy as np


def hv_inclusion_exclusion(points, ref):
    """Exact union volume of the [p, ref] boxes via inclusion-exclusion.
    Exponential in len(points); intended for fronts of at most ~8."""
    pts = [p for p in points if all(x < r for x, r in zip(p, ref))]
    total = 0.0
    for r in range(1, len(pts) + 1):
        for subset in itertools.combinations(pts, r):
            corner = [max(c) for c in zip(*subset)]
            vol = 1.0
            for c, rr in zip(corner, ref):
                vol *= max(rr - c, 0.0)
            total += (-1) ** (r + 1) * vol
    return total


def hv_monte_carlo(points, ref, n_draws, seed, chunk=100_000):
    """Monte-Carlo estimate of the dominated volume inside [0, ref]."""
    pts = np.array([p for p in points if all(x < r for x, r in zip(p, ref))])
    if pts.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    ref = np.asarray(ref, dtype=float)
    hits = 0
    remaining = n_draws
    while remaining > 0:
        m = min(chunk, remaining)
        draws = rng.random((m, 3)) * ref
        dominated = ((draws[:, None, :] >= pts[None, :, :]).all(axis=2)).any(axis=1)
        hits += int(dominated.sum())
        remaining -= m
    return hits / n_draws * float(np.prod(ref))
