"""Dominance/archive/hypervolume tests against brute-force oracles.

Hypervolume oracles: inclusion-exclusion over box intersections (exact,
viable to ~8 points) and Monte-Carlo integration (any size, statistical
tolerance). The sweep implementation must match both.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle_utils import hv_inclusion_exclusion, hv_monte_carlo

from gpudse.pareto import (
    ParetoArchive,
    crowding_distance,
    dominates,
    hypervolume,
    non_dominated_rank,
    sample_efficiency,
    strictly_better,
)
from gpudse.space import DesignPoint, PARAM_NAMES


# --------------------------------------------------------------------------
# dominance


def test_dominates_examples():
    assert dominates((0.5, 0.5, 0.5), (1, 1, 1))
    assert not dominates((1, 1, 1), (1, 1, 1))
    # measured design-vs-reference vector from the directional table
    assert dominates((0.717, 0.947, 0.772), (1, 1, 1))
    with pytest.raises(ValueError):
        dominates((1, 2), (1, 2, 3))


vec3 = st.tuples(*[st.floats(0.01, 2.0, allow_nan=False) for _ in range(3)])


@settings(max_examples=200, deadline=None)
@given(a=vec3, b=vec3, c=vec3)
def test_dominates_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    if dominates(a, b):
        assert not dominates(b, a)
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


# --------------------------------------------------------------------------
# archive


def _design(i):
    vals = dict(zip(PARAM_NAMES, (6, 1, 1, 4, 4, 32, 32, 1)))
    vals["mem_channels"] = 1 + (i % 12)
    vals["core_count"] = (1, 2, 4, 8, 16, 32, 64, 96, 108, 128, 132, 136, 140, 256)[i % 14]
    vals["sram_kb"] = (32, 64, 128, 192, 256, 512, 1024)[(i // 14) % 7]
    vals["link_count"] = (6, 12, 18, 24)[(i // 98) % 4]
    return DesignPoint.from_dict(vals)


def test_insert_dominated_point_rejected():
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    arch.insert(_design(0), (1, 1, 1))
    assert not arch.insert(_design(1), (2, 2, 2))
    assert len(arch.entries) == 1


def test_insert_mutually_nondominated_retained():
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    assert arch.insert(_design(0), (0.5, 1.5, 1.0))
    assert arch.insert(_design(1), (1.5, 0.5, 1.0))
    assert len(arch.entries) == 2


def test_insert_evicts_dominated():
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    arch.insert(_design(0), (0.5, 1.5, 1.0))
    arch.insert(_design(1), (1.5, 0.5, 1.0))
    assert arch.insert(_design(2), (0.4, 0.4, 0.4))
    assert arch.front() == [(0.4, 0.4, 0.4)]


def test_archive_matches_bruteforce_filter():
    rng = np.random.default_rng(42)
    pts = [tuple(rng.random(3)) for _ in range(1000)]
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    for i, p in enumerate(pts):
        arch.insert(_design(i), p)
    brute = {
        p for p in pts if not any(q != p and dominates(q, p) for q in pts)
    }
    assert set(arch.front()) == brute


def test_archive_dedups_by_design():
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    d = _design(3)
    assert arch.insert(d, (0.5, 0.5, 0.5))
    assert not arch.insert(d, (0.4, 0.4, 0.4))
    assert len(arch.entries) == 1


def test_archive_dump(tmp_path):
    arch = ParetoArchive(reference=(1.0, 1.0, 1.0))
    arch.insert(_design(0), (0.5, 0.5, 0.5))
    path = tmp_path / "pareto.json"
    arch.dump(path)
    import json

    doc = json.loads(path.read_text())
    assert doc["hypervolume"] == pytest.approx(0.125)
    assert len(doc["entries"]) == 1


# --------------------------------------------------------------------------
# hypervolume


def test_hv_single_box():
    assert hypervolume([(0.5, 0.5, 0.5)], (1, 1, 1)) == pytest.approx(0.125)


def test_hv_duplicates_add_nothing():
    assert hypervolume([(0.5, 0.5, 0.5)] * 2, (1, 1, 1)) == pytest.approx(0.125)


def test_hv_points_at_or_beyond_ref_contribute_zero():
    assert hypervolume([(1.0, 0.2, 0.2), (1.2, 0.1, 0.1)], (1, 1, 1)) == 0.0


def test_hv_requires_three_objectives():
    with pytest.raises(ValueError):
        hypervolume([(0.5, 0.5)], (1, 1))


def test_hv_matches_inclusion_exclusion_200_fronts():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        pts = [tuple(rng.random(3) * 1.2) for _ in range(n)]
        ours = hypervolume(pts, (1, 1, 1))
        oracle = hv_inclusion_exclusion(pts, (1, 1, 1))
        assert abs(ours - oracle) <= 1e-12


def test_hv_matches_monte_carlo():
    rng = np.random.default_rng(11)
    for trial in range(4):
        n = int(rng.integers(2, 65))
        pts = [tuple(rng.random(3)) for _ in range(n)]
        ours = hypervolume(pts, (1, 1, 1))
        mc = hv_monte_carlo(pts, (1, 1, 1), 200_000, seed=trial)
        assert abs(ours - mc) <= 0.01


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_hv_permutation_and_duplication_invariant(data):
    pts = data.draw(st.lists(vec3, min_size=1, max_size=6))
    base = hypervolume(pts, (1, 1, 1))
    perm = data.draw(st.permutations(pts))
    assert hypervolume(perm, (1, 1, 1)) == pytest.approx(base, abs=1e-12)
    assert hypervolume(pts + [pts[0]], (1, 1, 1)) == pytest.approx(base, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_hv_monotone_under_insertion(data):
    pts = data.draw(st.lists(vec3, min_size=1, max_size=6))
    extra = data.draw(vec3)
    base = hypervolume(pts, (1, 1, 1))
    grown = hypervolume(pts + [extra], (1, 1, 1))
    assert grown >= base - 1e-12
    if any(dominates(p, extra) or p == extra for p in pts):
        assert grown == pytest.approx(base, abs=1e-12)


# --------------------------------------------------------------------------
# sample efficiency


def test_sample_efficiency_fraction():
    objs = [(0.9, 0.9, 0.9)] * 421 + [(1.1, 0.9, 0.9)] * 579
    assert sample_efficiency(objs, (1, 1, 1)) == pytest.approx(0.421)


def test_sample_efficiency_zero_cases():
    assert sample_efficiency([(1.5, 1.5, 1.5)], (1, 1, 1)) == 0.0
    # equality in any coordinate is not strict improvement
    assert sample_efficiency([(1.0, 1.0, 1.0)] * 5, (1, 1, 1)) == 0.0
    with pytest.raises(ValueError):
        sample_efficiency([], (1, 1, 1))


def test_strictly_better():
    assert strictly_better((0.9, 0.9, 0.9), (1, 1, 1))
    assert not strictly_better((1.0, 0.9, 0.9), (1, 1, 1))


# --------------------------------------------------------------------------
# sorting helpers


def test_non_dominated_rank():
    objs = [(0.5, 0.5, 0.5), (1.0, 1.0, 1.0), (0.4, 0.9, 0.9), (2.0, 2.0, 2.0)]
    assert non_dominated_rank(objs) == [1, 2, 1, 3]


def test_crowding_boundaries_infinite():
    objs = [(0.1, 0.9, 0.5), (0.5, 0.5, 0.5), (0.9, 0.1, 0.5)]
    cd = crowding_distance(objs)
    assert cd[0] == float("inf") and cd[2] == float("inf")
    assert np.isfinite(cd[1])
