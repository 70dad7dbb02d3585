"""Baseline design-space explorers behind one propose/observe interface.

Five methods: grid sweep and random walker (no sample learning), plus
genetic, ant-colony, and nearest-neighbor Bayesian optimizers that adapt
to observed objective vectors. All draw only lattice values, so every
proposal validates by construction, and all are deterministic given the
seed and the observation sequence.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .pareto import crowding_distance, dominates, non_dominated_rank
from .space import (
    DesignPoint,
    PARAM_NAMES,
    SpaceSpec,
    design_at_index,
    random_design,
    space_cardinality,
    step_neighbor,
)

METHODS = ("grid", "random_walk", "genetic", "ant_colony", "bayesian")
ALIASES = {"gs": "grid", "rw": "random_walk", "ga": "genetic", "aco": "ant_colony", "bo": "bayesian"}


class BudgetExhausted(Exception):
    """The grid sweep has emitted its full stride schedule."""


class BaseOptimizer:
    method = "base"

    def __init__(self, spec: SpaceSpec, seed: int, options: dict | None = None):
        self.spec = spec
        self.seed = seed
        self.options = dict(options or {})
        self.rng = np.random.default_rng(seed)
        self.history: list[tuple[DesignPoint, tuple[float, ...]]] = []

    def propose(self, batch_size: int = 1) -> list[DesignPoint]:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        return [self._propose_one() for _ in range(batch_size)]

    def observe(self, design: DesignPoint, obj) -> None:
        self.history.append((design, tuple(float(x) for x in obj)))
        self._learn(design, self.history[-1][1])

    def _propose_one(self) -> DesignPoint:
        raise NotImplementedError

    def _learn(self, design: DesignPoint, obj: tuple[float, ...]) -> None:
        pass  # methods without sample learning keep only the history


class GridSearch(BaseOptimizer):
    """Evenly strided index sweep over the mixed-radix lattice."""

    method = "grid"

    def __init__(self, spec, seed, options=None):
        super().__init__(spec, seed, options)
        self.budget = int(self.options.get("budget", 1000))
        self.stride = max(1, space_cardinality(spec) // self.budget)
        self._cursor = 0

    def _propose_one(self) -> DesignPoint:
        if self._cursor >= self.budget:
            raise BudgetExhausted(f"grid sweep of {self.budget} strides complete")
        d = design_at_index(self.spec, self._cursor * self.stride)
        self._cursor += 1
        return d


class RandomWalker(BaseOptimizer):
    """Single-parameter one-step walk with occasional uniform restarts."""

    method = "random_walk"

    def __init__(self, spec, seed, options=None):
        super().__init__(spec, seed, options)
        self.restart_prob = float(self.options.get("restart_prob", 0.05))
        self._cur = random_design(spec, self.rng)
        self._started = False

    def _propose_one(self) -> DesignPoint:
        if not self._started:
            self._started = True
            return self._cur
        if self.rng.random() < self.restart_prob:
            self._cur = random_design(self.spec, self.rng)
            return self._cur
        while True:
            param = PARAM_NAMES[self.rng.integers(len(PARAM_NAMES))]
            delta = 1 if self.rng.random() < 0.5 else -1
            try:
                self._cur = step_neighbor(self.spec, self._cur, param, delta)
                return self._cur
            except Exception:
                continue  # boundary; redraw direction/parameter


class GeneticAlgorithm(BaseOptimizer):
    """Compact NSGA-II-style loop: binary tournament on (rank, crowding),
    uniform per-parameter crossover, one-step mutation, environmental
    selection by non-dominated sorting."""

    method = "genetic"

    def __init__(self, spec, seed, options=None):
        super().__init__(spec, seed, options)
        self.pop_size = int(self.options.get("population", 20))
        self.p_cross = float(self.options.get("crossover_prob", 0.9))
        self.p_mut = float(self.options.get("mutation_prob", 0.1))
        self.population: list[tuple[DesignPoint, tuple[float, ...]]] = []

    def _ranked(self):
        objs = [o for _, o in self.population]
        ranks = non_dominated_rank(objs)
        crowd = [0.0] * len(objs)
        for r in set(ranks):
            idx = [i for i, rr in enumerate(ranks) if rr == r]
            cd = crowding_distance([objs[i] for i in idx])
            for i, c in zip(idx, cd):
                crowd[i] = c
        return ranks, crowd

    def _tournament(self, ranks, crowd) -> DesignPoint:
        i, j = self.rng.integers(len(self.population), size=2)
        key = lambda k: (ranks[k], -crowd[k])
        return self.population[i if key(i) <= key(j) else j][0]

    def _propose_one(self) -> DesignPoint:
        if len(self.population) < 2:
            return random_design(self.spec, self.rng)
        ranks, crowd = self._ranked()
        a = self._tournament(ranks, crowd)
        b = self._tournament(ranks, crowd)
        child = dict(a.as_dict())
        if self.rng.random() < self.p_cross:
            for name in PARAM_NAMES:
                if self.rng.random() < 0.5:
                    child[name] = b.get(name)
        d = DesignPoint.from_dict(child)
        for name in PARAM_NAMES:
            if self.rng.random() < self.p_mut:
                delta = 1 if self.rng.random() < 0.5 else -1
                try:
                    d = step_neighbor(self.spec, d, name, delta)
                except Exception:
                    pass  # mutation at the boundary is a no-op
        return d

    def _learn(self, design, obj):
        self.population.append((design, obj))
        if len(self.population) > self.pop_size:
            objs = [o for _, o in self.population]
            ranks = non_dominated_rank(objs)
            crowd = [0.0] * len(objs)
            for r in set(ranks):
                idx = [i for i, rr in enumerate(ranks) if rr == r]
                cd = crowding_distance([objs[i] for i in idx])
                for i, c in zip(idx, cd):
                    crowd[i] = c
            order = sorted(range(len(objs)), key=lambda i: (ranks[i], -crowd[i]))
            self.population = [self.population[i] for i in order[: self.pop_size]]


class AntColony(BaseOptimizer):
    """Pheromone table over (parameter, value) cells. Construction samples
    each parameter proportionally to pheromone; observation evaporates all
    cells then deposits 1/rank on the observed design's cells, rank being
    1 + the number of history points dominating it (front-rank proxy that
    stays linear per observation)."""

    method = "ant_colony"

    def __init__(self, spec, seed, options=None):
        super().__init__(spec, seed, options)
        self.rho = float(self.options.get("evaporation", 0.1))
        self.pheromone = {
            p.name: np.ones(len(p.allowed_values)) for p in spec.parameters
        }

    def _propose_one(self) -> DesignPoint:
        vals = {}
        for p in self.spec.parameters:
            tau = self.pheromone[p.name]
            probs = tau / tau.sum()
            vals[p.name] = p.allowed_values[self.rng.choice(len(tau), p=probs)]
        return DesignPoint.from_dict(vals)

    def _learn(self, design, obj):
        rank = 1 + sum(1 for _, o in self.history[:-1] if dominates(o, obj))
        for name in self.pheromone:
            self.pheromone[name] *= 1.0 - self.rho
        for p in self.spec.parameters:
            j = p.allowed_values.index(design.get(p.name))
            self.pheromone[p.name][j] += 1.0 / rank


class BayesianOptimizer(BaseOptimizer):
    """Distance-weighted k-NN surrogate over min-max-scaled parameter
    indices; expected improvement on a weighted-Chebyshev scalarization
    with fresh random weights each proposal, maximized over a seeded
    candidate set."""

    method = "bayesian"

    def __init__(self, spec, seed, options=None):
        super().__init__(spec, seed, options)
        self.k = int(self.options.get("k_neighbors", 5))
        self.n_candidates = int(self.options.get("candidates", 512))

    def _scale(self, d: DesignPoint) -> np.ndarray:
        x = []
        for p in self.spec.parameters:
            vals = p.allowed_values
            v = d.get(p.name)
            idx = vals.index(v) if v in vals else float(np.searchsorted(vals, v)) - 0.5
            x.append(idx / max(len(vals) - 1, 1))
        return np.array(x)

    def acquisition_scores(self, candidates: list[DesignPoint], weights: np.ndarray) -> np.ndarray:
        """Expected improvement of each candidate under the given
        scalarization weights; exposed so proposals can be re-scored."""
        xs = np.array([self._scale(d) for d, _ in self.history])
        ys = np.array([o for _, o in self.history])
        g = (ys * weights).max(axis=1)
        best = g.min()
        xq = np.array([self._scale(c) for c in candidates])
        dist = np.sqrt(((xq[:, None, :] - xs[None, :, :]) ** 2).sum(axis=2))
        nn = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
        w = 1.0 / (np.take_along_axis(dist, nn, axis=1) + 1e-12)
        w = w / w.sum(axis=1, keepdims=True)
        gn = g[nn]
        mu = (w * gn).sum(axis=1)
        sigma = np.sqrt((w * (gn - mu[:, None]) ** 2).sum(axis=1))
        improvement = best - mu
        scores = np.maximum(improvement, 0.0)
        pos = sigma > 0
        z = np.divide(improvement, sigma, out=np.zeros_like(sigma), where=pos)
        scores[pos] = improvement[pos] * norm.cdf(z[pos]) + sigma[pos] * norm.pdf(z[pos])
        return scores

    def _propose_one(self) -> DesignPoint:
        if len(self.history) < self.k:
            return random_design(self.spec, self.rng)
        candidates = [random_design(self.spec, self.rng) for _ in range(self.n_candidates)]
        n_obj = len(self.history[0][1])
        weights = self.rng.dirichlet(np.ones(n_obj))
        scores = self.acquisition_scores(candidates, weights)
        self._last_proposal_state = (candidates, weights, scores)
        return candidates[int(np.argmax(scores))]


_CLASSES = {
    "grid": GridSearch,
    "random_walk": RandomWalker,
    "genetic": GeneticAlgorithm,
    "ant_colony": AntColony,
    "bayesian": BayesianOptimizer,
}


def make_optimizer(method: str, spec: SpaceSpec, seed: int, options: dict | None = None) -> BaseOptimizer:
    name = ALIASES.get(method, method)
    if name not in _CLASSES:
        raise KeyError(f"unknown optimizer method {method!r}; expected one of {METHODS} or {tuple(ALIASES)}")
    return _CLASSES[name](spec, seed, options)
