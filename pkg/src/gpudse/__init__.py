"""GPU design-space exploration for transformer inference workloads.

A discrete 8-parameter design lattice, an analytic roofline PPA model
with per-operator bottleneck attribution, Pareto/hypervolume tooling,
five baseline optimizers, a bottleneck-guided exploration loop with an
optional chat-completion backend, and a multiple-choice benchmark
generator with oracle-verified answer keys.
"""

__version__ = "0.1.0"

from .pareto import ParetoArchive, dominates, hypervolume, sample_efficiency
from .perfmodel import Evaluator, PpaMetrics, derive_hw, tensor_utilization
from .space import DesignPoint, SpaceSpec, space_cardinality

__all__ = [
    "__version__",
    "DesignPoint",
    "SpaceSpec",
    "space_cardinality",
    "Evaluator",
    "PpaMetrics",
    "derive_hw",
    "tensor_utilization",
    "ParetoArchive",
    "dominates",
    "hypervolume",
    "sample_efficiency",
]
