"""Multi-objective bookkeeping: dominance, Pareto archive, exact
3-objective hypervolume, sample efficiency. All objectives minimized."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .space import DesignPoint

Vec = tuple[float, ...]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """a <= b componentwise with at least one strict improvement."""
    if len(a) != len(b):
        raise ValueError("objective vectors must share dimensionality")
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def strictly_better(a: Sequence[float], b: Sequence[float]) -> bool:
    return all(x < y for x, y in zip(a, b))


@dataclass
class ParetoArchive:
    """Running non-dominated set, deduplicated by design point."""

    reference: Vec
    entries: list[tuple[DesignPoint, Vec]] = field(default_factory=list)

    def insert(self, design: DesignPoint, obj: Sequence[float]) -> bool:
        """Add iff no current entry dominates obj; evict entries it
        dominates. Returns True when the point enters the archive."""
        obj = tuple(float(x) for x in obj)
        for d, o in self.entries:
            if d == design:
                return False
            if dominates(o, obj):
                return False
        self.entries = [(d, o) for d, o in self.entries if not dominates(obj, o)]
        self.entries.append((design, obj))
        return True

    def front(self) -> list[Vec]:
        return [o for _, o in self.entries]

    def hypervolume(self) -> float:
        return hypervolume(self.front(), self.reference)

    def dump(self, path: str | Path) -> None:
        doc = {
            "reference": list(self.reference),
            "hypervolume": self.hypervolume(),
            "entries": [
                {"design": d.as_dict(), "objectives": list(o)}
                for d, o in sorted(self.entries, key=lambda e: e[1])
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def _staircase_area(points: list[tuple[float, float]], rx: float, ry: float) -> float:
    """Area of the union of [x, rx] x [y, ry] rectangles (minimization)."""
    pts = sorted(p for p in points if p[0] < rx and p[1] < ry)
    total = 0.0
    prev_y = ry
    for x, y in pts:
        if y < prev_y:
            total += (rx - x) * (prev_y - y)
            prev_y = y
    return total


def hypervolume(front: Iterable[Sequence[float]], ref: Sequence[float]) -> float:
    """Exact Lebesgue measure of the region dominated by `front` inside the
    box [0, ref], by sweeping slabs along the third objective and
    accumulating 2D staircase areas. Points at or beyond the reference in
    any coordinate contribute nothing."""
    ref = tuple(float(r) for r in ref)
    if len(ref) != 3:
        raise ValueError("hypervolume is implemented for exactly 3 objectives")
    pts = sorted(
        {tuple(max(float(x), 0.0) for x in p) for p in front
         if all(x < r for x, r in zip(p, ref))},
        key=lambda p: p[2],
    )
    if not pts:
        return 0.0
    volume = 0.0
    z_levels = sorted({p[2] for p in pts}) + [ref[2]]
    active: list[tuple[float, float]] = []
    i = 0
    for lo, hi in zip(z_levels, z_levels[1:]):
        while i < len(pts) and pts[i][2] <= lo:
            active.append((pts[i][0], pts[i][1]))
            i += 1
        volume += _staircase_area(active, ref[0], ref[1]) * (hi - lo)
    return volume


def sample_efficiency(objectives: Iterable[Sequence[float]], ref: Sequence[float]) -> float:
    """Fraction of evaluated samples strictly better than the reference in
    every objective. Duplicates count per evaluation."""
    objs = list(objectives)
    if not objs:
        raise ValueError("empty trajectory")
    wins = sum(1 for o in objs if strictly_better(o, ref))
    return wins / len(objs)


def non_dominated_rank(objectives: Sequence[Sequence[float]]) -> list[int]:
    """Front index (1 = non-dominated) for each point, by peeling fronts."""
    n = len(objectives)
    ranks = [0] * n
    remaining = set(range(n))
    rank = 1
    while remaining:
        front = [
            i for i in remaining
            if not any(j != i and dominates(objectives[j], objectives[i]) for j in remaining)
        ]
        for i in front:
            ranks[i] = rank
        remaining -= set(front)
        rank += 1
    return ranks


def crowding_distance(objectives: Sequence[Sequence[float]]) -> list[float]:
    """NSGA-II crowding metric within one front; boundary points get inf."""
    n = len(objectives)
    if n <= 2:
        return [float("inf")] * n
    dist = [0.0] * n
    m = len(objectives[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: objectives[i][k])
        lo, hi = objectives[order[0]][k], objectives[order[-1]][k]
        dist[order[0]] = dist[order[-1]] = float("inf")
        if hi == lo:
            continue
        for a, b, c in zip(order, order[1:], order[2:]):
            dist[b] += (objectives[c][k] - objectives[a][k]) / (hi - lo)
    return dist


def write_phv_curve(path: str | Path, curve: Sequence[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "hypervolume"])
        for step, hv in curve:
            w.writerow([step, repr(hv)])
