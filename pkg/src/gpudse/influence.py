"""Parameter-to-metric influence knowledge.

An influence map records, for every (parameter, metric) pair, the sign of
the dependency, a quantified magnitude (change in the metric per +1
lattice step at the sensitivity reference), and where that knowledge came
from: structural analysis of the model, measured one-step perturbations,
or refinement from exploration history. Structural zeros are hard: no
later stage may assign them a magnitude.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .perfmodel import Evaluator, PpaMetrics, derive_hw, structural_influences
from .space import DesignPoint, PARAM_NAMES, SpaceSpec, step_neighbor

METRICS = ("ttft", "tpot", "area", "peak_tensor", "peak_vector", "mem_bw", "net_bw")


class LlmMapInvalid(Exception):
    """An externally supplied influence map contradicts a structural hard zero."""


@dataclass
class InfluenceEntry:
    sign: int  # -1, 0, +1
    magnitude: float | None = None
    source: str = "structural"  # structural | measured | refined


@dataclass
class InfluenceMap:
    entries: dict[tuple[str, str], InfluenceEntry] = field(default_factory=dict)
    sensitivity_reference: DesignPoint | None = None

    def get(self, param: str, metric: str) -> InfluenceEntry:
        return self.entries[(param, metric)]

    def sign(self, param: str, metric: str) -> int:
        return self.entries[(param, metric)].sign

    def magnitude(self, param: str, metric: str) -> float:
        e = self.entries[(param, metric)]
        if e.sign == 0:
            return 0.0
        return e.magnitude if e.magnitude is not None else 0.0

    def is_hard_zero(self, param: str, metric: str) -> bool:
        return self.entries[(param, metric)].sign == 0

    def set_magnitude(self, param: str, metric: str, value: float, source: str) -> None:
        e = self.entries[(param, metric)]
        if e.sign == 0:
            raise ValueError(f"({param}, {metric}) is a structural hard zero")
        e.magnitude = float(value)
        e.source = source

    def measured(self) -> bool:
        return any(e.source in ("measured", "refined") for e in self.entries.values())

    def to_table(self) -> list[dict]:
        rows = []
        for param in PARAM_NAMES:
            for metric in METRICS:
                e = self.entries[(param, metric)]
                rows.append(
                    {
                        "parameter": param,
                        "metric": metric,
                        "sign": e.sign,
                        "magnitude": e.magnitude,
                        "source": e.source,
                    }
                )
        return rows

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_table(), indent=2, sort_keys=True))


def build_structural_map(spec: SpaceSpec) -> InfluenceMap:
    """Static backend: signs and hard zeros from the model's closed-form
    dependency structure. Magnitudes stay unset."""
    signs = structural_influences(spec)
    entries = {
        (p, m): InfluenceEntry(sign=signs[(p, m)]) for p in PARAM_NAMES for m in METRICS
    }
    return InfluenceMap(entries=entries)


def build_structural_map_from_signs(spec: SpaceSpec, signs: dict[str, dict[str, str]]) -> InfluenceMap:
    """Build a map from an externally proposed sign table (e.g. parsed from
    a language-model reply). Any nonzero claim on a structural hard zero
    raises LlmMapInvalid; callers fall back to the static backend."""
    structural = structural_influences(spec)
    sign_of = {"+": 1, "-": -1, "0": 0}
    entries: dict[tuple[str, str], InfluenceEntry] = {}
    for p in PARAM_NAMES:
        for m in METRICS:
            try:
                claimed = sign_of[signs[p][m].strip()]
            except (KeyError, AttributeError) as exc:
                raise LlmMapInvalid(f"missing or malformed sign for ({p}, {m})") from exc
            if structural[(p, m)] == 0 and claimed != 0:
                raise LlmMapInvalid(
                    f"({p}, {m}) claimed {'+' if claimed > 0 else '-'} but has no structural dependency"
                )
            entries[(p, m)] = InfluenceEntry(sign=claimed)
    return InfluenceMap(entries=entries)


@dataclass(frozen=True)
class SensitivityProbe:
    param: str
    direction: int  # +1 or -1
    design: DesignPoint
    metrics: PpaMetrics
    report: object


def measure_sensitivity(
    spec: SpaceSpec,
    reference: DesignPoint,
    evaluator: Evaluator,
    ahk: InfluenceMap,
    max_evals: int | None = None,
    perturb_performance: bool = True,
) -> list[SensitivityProbe]:
    """One-step perturbation study around `reference`.

    Evaluates reference +/- 1 step per parameter and writes central (or
    one-sided, at lattice edges) difference magnitudes per metric into the
    map, source="measured". Capability magnitudes come from the hardware
    derivation, latency/area magnitudes from full evaluations. Returns the
    probe evaluations so callers can charge them to a sample budget;
    respects `max_evals` by truncating the probe schedule.

    With perturb_performance=False only area (and capability) magnitudes
    are recorded, the cheap fallback for costly performance models.
    """
    ahk.sensitivity_reference = reference
    ref_metrics, _ = evaluator.evaluate(reference)
    probes: list[SensitivityProbe] = []
    budget = max_evals if max_evals is not None else float("inf")

    for param in PARAM_NAMES:
        sides: dict[int, tuple[DesignPoint, PpaMetrics] | None] = {1: None, -1: None}
        for direction in (1, -1):
            if budget <= 0:
                break
            try:
                d = step_neighbor(spec, reference, param, direction)
            except Exception:
                continue  # lattice edge: one-sided difference below
            metrics, report = evaluator.evaluate(d)
            probes.append(SensitivityProbe(param, direction, d, metrics, report))
            sides[direction] = (d, metrics)
            budget -= 1
        up, dn = sides[1], sides[-1]
        if up is None and dn is None:
            continue

        def diff(hi: float, lo: float, two_sided: bool) -> float:
            return (hi - lo) / (2.0 if two_sided else 1.0)

        two = up is not None and dn is not None
        hi_d, hi_m = up if up is not None else (reference, ref_metrics)
        lo_d, lo_m = dn if dn is not None else (reference, ref_metrics)

        if perturb_performance:
            pairs = (("ttft", hi_m.ttft_s, lo_m.ttft_s), ("tpot", hi_m.tpot_s, lo_m.tpot_s))
        else:
            pairs = ()
        pairs += (("area", hi_m.area_mm2, lo_m.area_mm2),)
        for metric, hi, lo in pairs:
            if not ahk.is_hard_zero(param, metric):
                ahk.set_magnitude(param, metric, diff(hi, lo, two), "measured")

        hw_hi = derive_hw(hi_d, evaluator.consts)
        hw_lo = derive_hw(lo_d, evaluator.consts)
        caps = (
            ("peak_tensor", hw_hi.peak_tensor_flops, hw_lo.peak_tensor_flops),
            ("peak_vector", hw_hi.peak_vector_flops, hw_lo.peak_vector_flops),
            ("mem_bw", hw_hi.mem_bw, hw_lo.mem_bw),
            ("net_bw", hw_hi.net_bw, hw_lo.net_bw),
        )
        for metric, hi, lo in caps:
            if not ahk.is_hard_zero(param, metric):
                ahk.set_magnitude(param, metric, diff(hi, lo, two), "measured")
    return probes
