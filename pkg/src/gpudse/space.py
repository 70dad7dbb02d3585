"""Discrete design lattice for an 8-GPU node and operations over it.

A design point fixes eight integer parameters (interconnect links, cores,
sublanes per core, systolic array edge, vector lanes, per-core SRAM,
global buffer, memory channels). Each parameter draws from an ordered
value list; the cross product of the default lists has 4,741,632 points.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

PARAM_NAMES = (
    "link_count",
    "core_count",
    "sublane_count",
    "systolic_dim",
    "vector_width",
    "sram_kb",
    "global_buffer_mb",
    "mem_channels",
)

DEFAULT_VALUES: dict[str, tuple[int, ...]] = {
    "link_count": (6, 12, 18, 24),
    "core_count": (1, 2, 4, 8, 16, 32, 64, 96, 108, 128, 132, 136, 140, 256),
    "sublane_count": (1, 2, 4, 8),
    "systolic_dim": (4, 8, 16, 32, 64, 128),
    "vector_width": (4, 8, 16, 32, 64, 128),
    "sram_kb": (32, 64, 128, 192, 256, 512, 1024),
    "global_buffer_mb": (32, 64, 128, 256, 320, 512, 1024),
    "mem_channels": tuple(range(1, 13)),
}

# A100 analogue. Its 40 MB global buffer is deliberately absent from the
# enumerable lattice; validate() admits it as a reference extension.
DEFAULT_REFERENCE = {
    "link_count": 12,
    "core_count": 108,
    "sublane_count": 4,
    "systolic_dim": 16,
    "vector_width": 32,
    "sram_kb": 128,
    "global_buffer_mb": 40,
    "mem_channels": 5,
}


class OutOfRangeError(Exception):
    """A step moved past the end of a parameter's value list."""


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    allowed_values: tuple[int, ...]

    def __post_init__(self):
        if not self.allowed_values:
            raise ValueError(f"{self.name}: empty value list")
        if any(b <= a for a, b in zip(self.allowed_values, self.allowed_values[1:])):
            raise ValueError(f"{self.name}: values must be strictly increasing")


@dataclass(frozen=True)
class DesignPoint:
    link_count: int
    core_count: int
    sublane_count: int
    systolic_dim: int  # square systolic array: height == width
    vector_width: int
    sram_kb: int
    global_buffer_mb: int
    mem_channels: int

    def get(self, name: str) -> int:
        return getattr(self, name)

    def with_value(self, name: str, value: int) -> "DesignPoint":
        return replace(self, **{name: int(value)})

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def astuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    @classmethod
    def from_dict(cls, d: dict) -> "DesignPoint":
        missing = [n for n in PARAM_NAMES if n not in d]
        if missing:
            raise ValueError(f"design point missing fields: {missing}")
        return cls(**{n: int(d[n]) for n in PARAM_NAMES})


@dataclass(frozen=True)
class SpaceSpec:
    parameters: tuple[ParameterSpec, ...]
    reference_design: DesignPoint

    def __post_init__(self):
        names = tuple(p.name for p in self.parameters)
        if names != PARAM_NAMES:
            raise ValueError(f"parameters must cover {PARAM_NAMES} in order, got {names}")

    def values(self, name: str) -> tuple[int, ...]:
        return self.parameters[PARAM_NAMES.index(name)].allowed_values

    @classmethod
    def default(cls) -> "SpaceSpec":
        params = tuple(ParameterSpec(n, tuple(DEFAULT_VALUES[n])) for n in PARAM_NAMES)
        return cls(params, DesignPoint.from_dict(DEFAULT_REFERENCE))

    @classmethod
    def from_mapping(cls, data: dict) -> "SpaceSpec":
        params = tuple(
            ParameterSpec(n, tuple(int(v) for v in data["parameters"][n]))
            for n in PARAM_NAMES
        )
        return cls(params, DesignPoint.from_dict(data["reference_design"]))

    def to_mapping(self) -> dict:
        return {
            "parameters": {p.name: list(p.allowed_values) for p in self.parameters},
            "reference_design": self.reference_design.as_dict(),
        }

    @classmethod
    def from_json(cls, path: str | Path) -> "SpaceSpec":
        return cls.from_mapping(json.loads(Path(path).read_text()))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_mapping(), indent=2, sort_keys=True))


def space_cardinality(spec: SpaceSpec) -> int:
    """Number of enumerable lattice points (reference extensions excluded)."""
    n = 1
    for p in spec.parameters:
        n *= len(p.allowed_values)
    return n


def validate(spec: SpaceSpec, d: DesignPoint) -> list[str]:
    """Return the names of fields outside their value lists (empty = ok).

    A field matching the reference design's value passes even when that
    value is not in the lattice (reference extension).
    """
    bad = []
    for p in spec.parameters:
        v = d.get(p.name)
        if v not in p.allowed_values and v != spec.reference_design.get(p.name):
            bad.append(p.name)
    return bad


def _position(values: tuple[int, ...], v: int, direction: int) -> int:
    """Index of `v` in `values`; off-lattice values resolve to the nearest
    neighbor in the move direction (insertion-point semantics)."""
    if v in values:
        return values.index(v)
    i = bisect.bisect_left(values, v)
    # moving up: behave as if sitting just below values[i];
    # moving down: just above values[i-1]
    return i - 1 if direction > 0 else i


def step_neighbor(spec: SpaceSpec, d: DesignPoint, param: str, delta_steps: int) -> DesignPoint:
    """Move `param` by `delta_steps` positions along its ordered value list.

    Raises OutOfRangeError when the move exits the list. Off-lattice
    starting values (reference extensions) step to lattice values.
    """
    if param not in PARAM_NAMES:
        raise KeyError(f"unknown parameter {param!r}")
    if delta_steps == 0:
        return d
    values = spec.values(param)
    j = _position(values, d.get(param), delta_steps) + delta_steps
    if j < 0 or j >= len(values):
        raise OutOfRangeError(f"{param}: step {delta_steps:+d} from {d.get(param)} leaves the value list")
    return d.with_value(param, values[j])


def steps_between(spec: SpaceSpec, param: str, v_from: int, v_to: int) -> int:
    """Signed number of lattice steps from v_from to v_to along `param`."""
    values = spec.values(param)
    if v_from == v_to:
        return 0
    direction = 1 if v_to > v_from else -1
    return _position(values, v_to, -direction) - _position(values, v_from, direction)


def random_design(spec: SpaceSpec, rng: np.random.Generator) -> DesignPoint:
    """Uniform draw over the lattice; deterministic for a fixed generator state."""
    vals = {p.name: p.allowed_values[rng.integers(len(p.allowed_values))] for p in spec.parameters}
    return DesignPoint.from_dict(vals)


def design_at_index(spec: SpaceSpec, index: int) -> DesignPoint:
    """Mixed-radix decode of a lattice index; index 0 is the all-minimum design.

    The last parameter varies fastest.
    """
    card = space_cardinality(spec)
    if not 0 <= index < card:
        raise IndexError(f"lattice index {index} outside [0, {card})")
    vals: dict[str, int] = {}
    for p in reversed(spec.parameters):
        n = len(p.allowed_values)
        vals[p.name] = p.allowed_values[index % n]
        index //= n
    return DesignPoint.from_dict(vals)
