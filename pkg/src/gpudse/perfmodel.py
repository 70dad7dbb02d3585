"""Roofline evaluation of a design point with per-operator stall attribution.

Maps a design to hardware capabilities, times each operator of a phase
graph as the max of its compute / DRAM / interconnect bounds, sums the
sequential chain into TTFT and TPOT, and attributes each phase's time to
the binding resources. Area is a calibrated linear model, solved so the
reference design hits a chosen die size.

DRAM traffic policy per operator:
  * weighted matmuls stream K*N weights once when the weight tile fits
    per-core SRAM, otherwise the tiled re-read bound 2*M*K*N/T elements
    (T = floor(sqrt(sram_bytes / elem / 3))), never less than one full
    weight pass;
  * activation tensors hit DRAM only when larger than the global buffer
    (in the tiled case only the output tensor is charged, matching the
    tiled bound's M*N term);
  * attention matmuls have no weights; their query/cache/score tensors
    are gated per tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .space import DesignPoint, SpaceSpec
from .workload import ModelConfig, OperatorSpec, PhaseGraph, build_decode, build_prefill

RESOURCES = ("tensor_compute", "vector_compute", "memory_bw", "interconnect")

# Which metrics each capability metric structurally depends on. The vector
# peak has no dependency on the systolic array and vice versa; these zeros
# are hard and survive any later refinement.
CAPABILITY_PARAMS = {
    "peak_tensor": ("core_count", "sublane_count", "systolic_dim"),
    "peak_vector": ("core_count", "sublane_count", "vector_width"),
    "mem_bw": ("mem_channels",),
    "net_bw": ("link_count",),
}

RESOURCE_METRIC = {
    "tensor_compute": "peak_tensor",
    "vector_compute": "peak_vector",
    "memory_bw": "mem_bw",
    "interconnect": "net_bw",
}


def solve_area_constants(
    reference: dict,
    die_mm2: float,
    share_cores: float,
    share_gb: float,
    share_mem: float,
    share_link: float,
    core_split: dict,
) -> dict:
    """Solve per-unit area constants so the reference design's blocks hit
    the given shares of the die. core_split divides the core block across
    its base logic, systolic PEs, vector lanes, and SRAM."""
    if abs(share_cores + share_gb + share_mem + share_link - 1.0) > 1e-9:
        raise ValueError("die shares must sum to 1")
    if abs(sum(core_split.values()) - 1.0) > 1e-9:
        raise ValueError("core_split must sum to 1")
    per_core = share_cores * die_mm2 / reference["core_count"]
    sl, sy, vw, sr = (
        reference["sublane_count"],
        reference["systolic_dim"],
        reference["vector_width"],
        reference["sram_kb"],
    )
    return {
        "a_core_base": core_split["base"] * per_core,
        "a_pe": core_split["pe"] * per_core / (sl * sy * sy),
        "a_lane": core_split["lane"] * per_core / (sl * vw),
        "a_sram": core_split["sram"] * per_core / sr,
        "a_gb": share_gb * die_mm2 / reference["global_buffer_mb"],
        "a_mem": share_mem * die_mm2 / reference["mem_channels"],
        "a_link": share_link * die_mm2 / reference["link_count"],
    }


@dataclass(frozen=True)
class CalibrationConstants:
    clock_hz: float
    bw_per_channel: float
    bw_per_link: float
    n_gpus: int
    a_core_base: float
    a_pe: float
    a_lane: float
    a_sram: float
    a_gb: float
    a_mem: float
    a_link: float

    @classmethod
    def from_mapping(cls, data: dict) -> "CalibrationConstants":
        fields = (
            "clock_hz", "bw_per_channel", "bw_per_link", "n_gpus",
            "a_core_base", "a_pe", "a_lane", "a_sram", "a_gb", "a_mem", "a_link",
        )
        return cls(**{k: (int(data[k]) if k == "n_gpus" else float(data[k])) for k in fields})


@dataclass(frozen=True)
class HardwareDerived:
    peak_tensor_flops: float
    peak_vector_flops: float
    mem_bw: float
    net_bw: float
    clock_hz: float
    sram_bytes_per_core: int
    gb_bytes: int


def derive_hw(d: DesignPoint, consts: CalibrationConstants) -> HardwareDerived:
    """Capability formulas: each MAC counts 2 FLOP per cycle."""
    return HardwareDerived(
        peak_tensor_flops=d.core_count * d.sublane_count * d.systolic_dim ** 2 * 2 * consts.clock_hz,
        peak_vector_flops=d.core_count * d.sublane_count * d.vector_width * 2 * consts.clock_hz,
        mem_bw=d.mem_channels * consts.bw_per_channel,
        net_bw=d.link_count * consts.bw_per_link,
        clock_hz=consts.clock_hz,
        sram_bytes_per_core=d.sram_kb * 1024,
        gb_bytes=d.global_buffer_mb * (1 << 20),
    )


def tensor_utilization(gemm_dims: tuple[int, int, int], systolic_dim: int) -> float:
    """Fraction of systolic MACs doing useful work after padding M and N
    up to the array edge. Small-M decode matmuls on wide arrays suffer."""
    m, _, n = gemm_dims
    row = m / (math.ceil(m / systolic_dim) * systolic_dim)
    col = n / (math.ceil(n / systolic_dim) * systolic_dim)
    return row * col


def area(d: DesignPoint, consts: CalibrationConstants) -> float:
    """Linear area model, monotone nondecreasing in every parameter."""
    core = (
        consts.a_core_base
        + d.sublane_count * (consts.a_pe * d.systolic_dim ** 2 + consts.a_lane * d.vector_width)
        + consts.a_sram * d.sram_kb
    )
    return (
        d.core_count * core
        + consts.a_gb * d.global_buffer_mb
        + consts.a_mem * d.mem_channels
        + consts.a_link * d.link_count
    )


def attributable_area(d: DesignPoint, param: str, consts: CalibrationConstants) -> float:
    """Area currently tied up by one parameter's block: the budget a
    trade-off on that parameter can release."""
    pe = consts.a_pe * d.systolic_dim ** 2
    lane = consts.a_lane * d.vector_width
    per_core = consts.a_core_base + d.sublane_count * (pe + lane) + consts.a_sram * d.sram_kb
    return {
        "link_count": consts.a_link * d.link_count,
        "core_count": d.core_count * per_core,
        "sublane_count": d.core_count * d.sublane_count * (pe + lane),
        "systolic_dim": d.core_count * d.sublane_count * pe,
        "vector_width": d.core_count * d.sublane_count * lane,
        "sram_kb": d.core_count * consts.a_sram * d.sram_kb,
        "global_buffer_mb": consts.a_gb * d.global_buffer_mb,
        "mem_channels": consts.a_mem * d.mem_channels,
    }[param]


@dataclass(frozen=True)
class PpaMetrics:
    ttft_s: float
    tpot_s: float
    area_mm2: float
    ttft_n: float
    tpot_n: float
    area_n: float

    def normalized(self) -> tuple[float, float, float]:
        return (self.ttft_n, self.tpot_n, self.area_n)

    def raw(self) -> tuple[float, float, float]:
        return (self.ttft_s, self.tpot_s, self.area_mm2)


@dataclass(frozen=True)
class OperatorTiming:
    name: str
    unit_class: str
    bound_time_s: float
    binding_resource: str
    compute_time_s: float
    memory_time_s: float
    comm_time_s: float
    utilization: float | None  # tensor ops only


@dataclass(frozen=True)
class PhaseBreakdown:
    phase: str
    total_s: float
    operators: tuple[OperatorTiming, ...]
    stall_shares: dict[str, float]  # fractions over RESOURCES, summing to 1
    dominant_resource: str


@dataclass(frozen=True)
class BottleneckReport:
    prefill: PhaseBreakdown
    decode: PhaseBreakdown

    def phase(self, name: str) -> PhaseBreakdown:
        return self.prefill if name == "prefill" else self.decode


def _tile_edge(sram_bytes: int, elem_bytes: int) -> int:
    return math.floor(math.sqrt(sram_bytes / elem_bytes / 3))


def _op_dram_bytes(op: OperatorSpec, hw: HardwareDerived, elem_bytes: int) -> float:
    gate = lambda b: b if b > hw.gb_bytes else 0
    if op.unit_class == "tensor" and op.weight_bytes > 0:
        if op.weight_bytes <= hw.sram_bytes_per_core:
            return op.weight_bytes + sum(gate(b) for b in op.act_bytes)
        m, k, n = op.gemm_dims
        t = _tile_edge(hw.sram_bytes_per_core, elem_bytes)
        # tiled bound; a full weight pass is the floor (small-M matmuls
        # still stream every weight once)
        stream = max(op.weight_bytes, 2 * m * k * n * elem_bytes / t)
        return stream + gate(op.act_bytes[-1])
    return op.weight_bytes + sum(gate(b) for b in op.act_bytes)


def _time_operator(op: OperatorSpec, d: DesignPoint, hw: HardwareDerived,
                   consts: CalibrationConstants, elem_bytes: int) -> OperatorTiming:
    if op.unit_class == "comm":
        g = consts.n_gpus
        ring_bytes = 2 * (g - 1) / g * op.comm_bytes
        t = ring_bytes / hw.net_bw
        return OperatorTiming(op.name, op.unit_class, t, "interconnect", 0.0, 0.0, t, None)

    util = None
    if op.unit_class == "tensor":
        util = tensor_utilization(op.gemm_dims, d.systolic_dim)
        t_comp = op.flops / (hw.peak_tensor_flops * util)
        comp_resource = "tensor_compute"
    else:
        t_comp = op.flops / hw.peak_vector_flops
        comp_resource = "vector_compute"
    t_mem = _op_dram_bytes(op, hw, elem_bytes) / hw.mem_bw
    if t_mem >= t_comp:
        return OperatorTiming(op.name, op.unit_class, t_mem, "memory_bw", t_comp, t_mem, 0.0, util)
    return OperatorTiming(op.name, op.unit_class, t_comp, comp_resource, t_comp, t_mem, 0.0, util)


def _evaluate_phase(graph: PhaseGraph, d: DesignPoint, hw: HardwareDerived,
                    consts: CalibrationConstants, elem_bytes: int) -> PhaseBreakdown:
    timings = tuple(_time_operator(op, d, hw, consts, elem_bytes) for op in graph.operators)
    total = sum(t.bound_time_s for t in timings)
    shares = {r: 0.0 for r in RESOURCES}
    for t in timings:
        shares[t.binding_resource] += t.bound_time_s
    shares = {r: v / total for r, v in shares.items()}
    dominant = max(RESOURCES, key=lambda r: shares[r])
    return PhaseBreakdown(graph.phase, total, timings, shares, dominant)


class Evaluator:
    """Evaluates designs against fixed prefill/decode graphs, normalizing
    PPA by a reference design. Pure per call; safe to share read-only."""

    def __init__(self, spec: SpaceSpec, model: ModelConfig, consts: CalibrationConstants,
                 batch: int, prefill_seq_len: int, decode_kv_len: int):
        self.spec = spec
        self.model = model
        self.consts = consts
        self.prefill_graph = build_prefill(model, batch, prefill_seq_len)
        self.decode_graph = build_decode(model, batch, decode_kv_len)
        self._ref_raw = self._raw(spec.reference_design)

    @classmethod
    def from_config(cls, cfg: dict, spec: SpaceSpec | None = None) -> "Evaluator":
        from .config import make_space

        spec = spec or make_space(cfg)
        model = ModelConfig.from_mapping(cfg["model"])
        consts = CalibrationConstants.from_mapping(cfg["calibration"])
        wl = cfg["workload"]
        kv_len = int(wl["prefill_seq_len"]) + int(wl["decode_output_index"])
        return cls(spec, model, consts, int(wl["batch"]), int(wl["prefill_seq_len"]), kv_len)

    def _raw(self, d: DesignPoint) -> tuple[PhaseBreakdown, PhaseBreakdown, float]:
        hw = derive_hw(d, self.consts)
        e = self.model.elem_bytes
        pre = _evaluate_phase(self.prefill_graph, d, hw, self.consts, e)
        dec = _evaluate_phase(self.decode_graph, d, hw, self.consts, e)
        return pre, dec, area(d, self.consts)

    @property
    def reference_metrics(self) -> tuple[float, float, float]:
        pre, dec, ar = self._ref_raw
        return (pre.total_s, dec.total_s, ar)

    def evaluate(self, d: DesignPoint) -> tuple[PpaMetrics, BottleneckReport]:
        pre, dec, ar = self._raw(d)
        ref_pre, ref_dec, ref_area = self._ref_raw
        metrics = PpaMetrics(
            ttft_s=pre.total_s,
            tpot_s=dec.total_s,
            area_mm2=ar,
            ttft_n=pre.total_s / ref_pre.total_s,
            tpot_n=dec.total_s / ref_dec.total_s,
            area_n=ar / ref_area,
        )
        return metrics, BottleneckReport(prefill=pre, decode=dec)


def structural_influences(spec: SpaceSpec) -> dict[tuple[str, str], int]:
    """Signs of each (parameter, metric) structural dependency: +1 grows
    the metric with the parameter, -1 shrinks it, 0 means no dependency
    (a hard zero). Every parameter weakly reduces both latencies and
    grows area; capability metrics follow their formulas exactly."""
    from .space import PARAM_NAMES

    signs: dict[tuple[str, str], int] = {}
    for p in PARAM_NAMES:
        signs[(p, "area")] = 1
        signs[(p, "ttft")] = -1
        signs[(p, "tpot")] = -1
        for cap, owners in CAPABILITY_PARAMS.items():
            signs[(p, cap)] = 1 if p in owners else 0
    return signs
