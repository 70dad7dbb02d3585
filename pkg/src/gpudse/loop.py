"""Bottleneck-guided exploration loop.

One run: build the structural influence map, measure one-step
sensitivities around the starting design (each perturbation charged to
the sample budget), then iterate directive steps. Each step reads the
current design's bottleneck report, proposes a boost on the most
effective lever for the dominant resource plus a trade-off on the least
critical one, applies it, records the sample, and refines the influence
magnitudes from the observed pair. Failed directives are fingerprinted
and never retried from the same bottleneck; when every candidate
directive is blocked the loop restarts from a random design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import llm as llm_mod
from . import prompts
from .config import sub_rng
from .influence import InfluenceMap, build_structural_map, measure_sensitivity
from .pareto import ParetoArchive, dominates, strictly_better
from .perfmodel import (
    CAPABILITY_PARAMS,
    Evaluator,
    PpaMetrics,
    RESOURCE_METRIC,
    attributable_area,
)
from .space import DesignPoint, PARAM_NAMES, SpaceSpec, random_design, step_neighbor, steps_between, validate


class ExhaustedError(Exception):
    """Every candidate directive is blocked from the current design."""


class InvalidDirectiveError(Exception):
    """A directive produced no applicable move."""


@dataclass(frozen=True)
class StrategyDirective:
    target_bottleneck: str
    boosts: tuple[tuple[str, int], ...]
    tradeoff: tuple[str, int] | None
    aggressiveness: int
    rationale: str = ""

    def __post_init__(self):
        if not self.boosts:
            raise ValueError("boosts must be non-empty")
        named = [p for p, _ in self.boosts] + ([self.tradeoff[0]] if self.tradeoff else [])
        if len(named) != len(set(named)):
            raise ValueError("directive parameters must be distinct")

    def fingerprint(self) -> tuple:
        """Bottleneck plus signed parameter set; step magnitudes excluded
        so near-duplicate directives are blocked together."""
        moves = [(p, 1 if s > 0 else -1) for p, s in self.boosts]
        if self.tradeoff:
            moves.append((self.tradeoff[0], 1 if self.tradeoff[1] > 0 else -1))
        return (self.target_bottleneck, tuple(sorted(moves)))

    def to_record(self) -> dict:
        return {
            "target_bottleneck": self.target_bottleneck,
            "boosts": [[p, s] for p, s in self.boosts],
            "tradeoff": list(self.tradeoff) if self.tradeoff else None,
            "aggressiveness": self.aggressiveness,
            "rationale": self.rationale,
        }


@dataclass
class FailureMemory:
    fingerprints: set = field(default_factory=set)

    def add(self, directive: StrategyDirective) -> None:
        self.fingerprints.add(directive.fingerprint())

    def blocked(self, directive: StrategyDirective) -> bool:
        return directive.fingerprint() in self.fingerprints


@dataclass
class TrajectorySample:
    step: int
    design: DesignPoint
    metrics: PpaMetrics
    report: object  # BottleneckReport
    directive: StrategyDirective | None
    outcome: str  # improved | neutral | failed
    dominates_reference: bool
    kind: str  # initial | probe | step | restart
    flags: tuple[str, ...] = ()


def _boost_candidates(ahk: InfluenceMap, resource: str, objective: str) -> list[str]:
    """Parameters worth boosting against `resource`: first its structural
    capability levers ranked by measured capability gain, then any other
    parameter with a favorable measured effect on the current objective
    (covers saturation of the direct lever, e.g. memory-bound designs
    whose channel count is maxed but whose SRAM still cuts traffic)."""
    cap_metric = RESOURCE_METRIC[resource]
    primary = [p for p in CAPABILITY_PARAMS[cap_metric] if ahk.magnitude(p, cap_metric) > 0]
    primary.sort(key=lambda p: (-ahk.magnitude(p, cap_metric), PARAM_NAMES.index(p)))
    secondary = [
        p for p in PARAM_NAMES
        if p not in primary and ahk.magnitude(p, objective) < 0
    ]
    secondary.sort(key=lambda p: (ahk.magnitude(p, objective), PARAM_NAMES.index(p)))
    return primary + secondary


def _tradeoff_candidates(ahk: InfluenceMap, objective: str, exclude: set[str],
                         current: DesignPoint, consts) -> list[str]:
    """Least-critical-first: smallest influence on the current objective,
    ties broken toward the parameter tying up the most die area (the
    biggest budget a trade-off can release), then parameter order."""
    cands = [p for p in PARAM_NAMES if p not in exclude and ahk.magnitude(p, "area") > 0]
    cands.sort(
        key=lambda p: (
            abs(ahk.magnitude(p, objective)),
            -attributable_area(current, p, consts),
            PARAM_NAMES.index(p),
        )
    )
    return cands


def propose_directive(
    report_phase,
    ahk: InfluenceMap,
    spec: SpaceSpec,
    current: DesignPoint,
    objective: str,
    visited: set,
    failures: FailureMemory,
    consts,
    aggressiveness: int = 2,
) -> StrategyDirective:
    """Rule backend: boost the strongest lever of the dominant bottleneck,
    trade off the least critical resource, skipping blocked fingerprints
    and already-visited designs. Raises ExhaustedError when every
    candidate is blocked."""
    if not ahk.measured():
        raise ValueError("influence map has no measured magnitudes yet")
    resource = report_phase.dominant_resource
    n_boosts = max(1, aggressiveness - 1)
    boost_rank = _boost_candidates(ahk, resource, objective)

    def in_range(d: DesignPoint, param: str, delta: int) -> DesignPoint | None:
        try:
            return step_neighbor(spec, d, param, delta)
        except Exception:
            return None

    applicable = [p for p in boost_rank if in_range(current, p, +1) is not None]
    from itertools import combinations

    for k in range(min(n_boosts, len(applicable)), 0, -1):
        for combo in combinations(applicable, k):
            d_boosted = current
            ok = True
            for p in combo:
                nxt = in_range(d_boosted, p, +1)
                if nxt is None:
                    ok = False
                    break
                d_boosted = nxt
            if not ok:
                continue
            for tr in _tradeoff_candidates(ahk, objective, set(combo), current, consts):
                d_final = in_range(d_boosted, tr, -1)
                if d_final is None or d_final.astuple() in visited:
                    continue
                directive = StrategyDirective(
                    target_bottleneck=resource,
                    boosts=tuple((p, +1) for p in combo),
                    tradeoff=(tr, -1),
                    aggressiveness=k + 1,
                    rationale=f"{resource} dominates; boost {'+'.join(combo)}, release {tr}",
                )
                if failures.blocked(directive):
                    continue
                return directive
            # boost-only fallback when no trade-off applies
            if d_boosted.astuple() not in visited:
                directive = StrategyDirective(
                    target_bottleneck=resource,
                    boosts=tuple((p, +1) for p in combo),
                    tradeoff=None,
                    aggressiveness=k,
                    rationale=f"{resource} dominates; boost {'+'.join(combo)}",
                )
                if not failures.blocked(directive):
                    return directive
    raise ExhaustedError(f"no unblocked directive from {current.as_dict()} targeting {resource}")


def apply_directive(spec: SpaceSpec, d: DesignPoint, directive: StrategyDirective) -> tuple[DesignPoint, tuple[str, ...]]:
    """Apply boosts then the trade-off via lattice steps. Moves that run
    off the value list clamp to the boundary and are flagged; a directive
    whose moves all clamp to no-ops is invalid."""
    flags: list[str] = []
    result = d
    moves = list(directive.boosts) + ([directive.tradeoff] if directive.tradeoff else [])
    applied = 0
    for param, steps in moves:
        moved = result
        remaining = steps
        direction = 1 if steps > 0 else -1
        while remaining != 0:
            try:
                moved = step_neighbor(spec, moved, param, direction)
                remaining -= direction
            except Exception:
                flags.append(f"clamped:{param}")
                break
        if moved != result:
            applied += 1
        result = moved
    if applied == 0:
        raise InvalidDirectiveError("no directive move was applicable")
    if validate(spec, result):
        raise InvalidDirectiveError(f"directive result violates the space: {result.as_dict()}")
    return result, tuple(dict.fromkeys(flags))


def refine_pair(ahk: InfluenceMap, spec: SpaceSpec, prev: TrajectorySample,
                cur: TrajectorySample, alpha: float = 0.5) -> bool:
    """Update measured magnitudes from one observed sample pair.

    Pairs differing in one parameter yield a direct finite difference;
    pairs differing in two attribute each parameter's share using the
    other's current magnitude. Pairs differing in three or more are
    unattributable and skipped. Returns True when an update happened.
    """
    changed = [p for p in PARAM_NAMES if prev.design.get(p) != cur.design.get(p)]
    if not changed or len(changed) > 2:
        return False
    steps = {
        p: steps_between(spec, p, prev.design.get(p), cur.design.get(p)) for p in changed
    }
    deltas = {
        "ttft": cur.metrics.ttft_s - prev.metrics.ttft_s,
        "tpot": cur.metrics.tpot_s - prev.metrics.tpot_s,
        "area": cur.metrics.area_mm2 - prev.metrics.area_mm2,
    }
    for metric, delta in deltas.items():
        estimates = {}
        for p in changed:
            others = sum(ahk.magnitude(q, metric) * steps[q] for q in changed if q != p)
            estimates[p] = (delta - others) / steps[p]
        for p, fd in estimates.items():
            if ahk.is_hard_zero(p, metric):
                continue
            old = ahk.get(p, metric).magnitude
            new = fd if old is None else (1 - alpha) * old + alpha * fd
            ahk.set_magnitude(p, metric, new, "refined")
    return True


def refine_influence(ahk: InfluenceMap, spec: SpaceSpec, samples: list[TrajectorySample],
                     failures: FailureMemory, alpha: float = 0.5) -> None:
    """Whole-trajectory refinement: consecutive attributable pairs update
    magnitudes; failed samples register their directive fingerprints."""
    for prev, cur in zip(samples, samples[1:]):
        refine_pair(ahk, spec, prev, cur, alpha)
    for s in samples:
        if s.outcome == "failed" and s.directive is not None:
            failures.add(s.directive)


@dataclass
class LoopResult:
    trajectory: list[TrajectorySample]
    archive: ParetoArchive
    influence: InfluenceMap
    failures: FailureMemory


def _classify(prev_n: tuple, new_n: tuple, objective: str, margin: float) -> str:
    idx = {"ttft": 0, "tpot": 1}[objective]
    if new_n[idx] > prev_n[idx]:
        return "failed"
    if dominates(new_n, prev_n):
        return "improved"
    if prev_n[idx] > 0 and (prev_n[idx] - new_n[idx]) / prev_n[idx] >= margin:
        return "improved"
    return "neutral"


def _llm_directive(gateway_backend, spec, ahk, current, metrics_n, report_phase,
                   objective, visited, failures, log: list) -> StrategyDirective | None:
    """Ask the chat backend for a directive; one corrective re-prompt on a
    parse failure, then give up (caller falls back to the rule backend)."""
    user = prompts.strategy_user_prompt(
        design=current.as_dict(),
        metrics={"ttft_n": metrics_n[0], "tpot_n": metrics_n[1], "area_n": metrics_n[2]},
        stall_shares=report_phase.stall_shares,
        dominant=report_phase.dominant_resource,
        objective=objective,
        influence_rows=ahk.to_table(),
        visited=len(visited),
        blocked=sorted(str(f) for f in failures.fingerprints),
    )
    messages = [("user", user)]
    for _ in range(2):
        req = llm_mod.ChatRequest(
            system_prompt=prompts.STRATEGY_SYSTEM, messages=tuple(messages), temperature=0.0
        )
        try:
            import time as _time

            t0 = _time.perf_counter()
            reply = llm_mod.complete(req, gateway_backend)
            log.append({"prompt": user, "reply": reply, "latency_s": _time.perf_counter() - t0})
        except llm_mod.LlmError as exc:
            log.append({"prompt": user, "error": str(exc)})
            return None
        try:
            directive = llm_mod.parse_directive(reply, spec)
        except llm_mod.ParseError as exc:
            messages.append(("assistant", reply))
            messages.append(("user", f"That reply failed to parse ({exc}); emit only the JSON directive."))
            continue
        if failures.blocked(directive):
            return None
        return directive
    return None


def run_loop(
    spec: SpaceSpec,
    evaluator: Evaluator,
    initial: DesignPoint | None = None,
    budget: int = 20,
    backend: str = "rule",
    seed: int = 0,
    aggressiveness: int = 2,
    alternation_threshold: float = 1.10,
    improve_margin: float = 0.01,
    refine_alpha: float = 0.5,
    sensitivity_perturbs_performance: bool = True,
    gateway_backend=None,
    llm_log: list | None = None,
) -> LoopResult:
    """Run the guided loop for `budget` evaluations (sensitivity probes
    included) and return the trajectory, Pareto archive, and final
    influence map. Deterministic for a fixed seed under the rule backend.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if backend not in ("rule", "llm"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "llm" and gateway_backend is None:
        raise ValueError("llm backend requires a gateway backend")

    initial = initial or spec.reference_design
    rng = sub_rng(seed, "loop-restarts")
    archive = ParetoArchive(reference=(1.0, 1.0, 1.0))
    trajectory: list[TrajectorySample] = []
    visited: set = set()
    failures = FailureMemory()
    llm_log = llm_log if llm_log is not None else []

    def record(design, directive, outcome, kind, flags=()) -> TrajectorySample:
        metrics, report = evaluator.evaluate(design)
        sample = TrajectorySample(
            step=len(trajectory),
            design=design,
            metrics=metrics,
            report=report,
            directive=directive,
            outcome=outcome,
            dominates_reference=strictly_better(metrics.normalized(), (1.0, 1.0, 1.0)),
            kind=kind,
            flags=tuple(flags),
        )
        trajectory.append(sample)
        visited.add(design.astuple())
        archive.insert(design, metrics.normalized())
        return sample

    current = record(initial, None, "neutral", "initial")

    ahk = build_structural_map(spec)
    probes = measure_sensitivity(
        spec, initial, evaluator, ahk,
        max_evals=budget - len(trajectory),
        perturb_performance=sensitivity_perturbs_performance,
    )
    for probe in probes:
        sample = TrajectorySample(
            step=len(trajectory),
            design=probe.design,
            metrics=probe.metrics,
            report=probe.report,
            directive=None,
            outcome="neutral",
            dominates_reference=strictly_better(probe.metrics.normalized(), (1.0, 1.0, 1.0)),
            kind="probe",
        )
        trajectory.append(sample)
        visited.add(probe.design.astuple())
        archive.insert(probe.design, probe.metrics.normalized())

    round_idx = 0
    while len(trajectory) < budget:
        n = current.metrics.normalized()
        if n[0] >= n[1] * alternation_threshold:
            objective = "ttft"
        elif n[1] >= n[0] * alternation_threshold:
            objective = "tpot"
        else:
            objective = "ttft" if round_idx % 2 == 0 else "tpot"
        phase = current.report.phase("prefill" if objective == "ttft" else "decode")

        directive = None
        flags: list[str] = []
        if backend == "llm":
            directive = _llm_directive(
                gateway_backend, spec, ahk, current.design, n, phase,
                objective, visited, failures, llm_log,
            )
            if directive is not None:
                try:
                    nxt, clamp_flags = apply_directive(spec, current.design, directive)
                    if nxt.astuple() in visited:
                        directive = None
                    else:
                        flags.extend(clamp_flags)
                except InvalidDirectiveError:
                    directive = None
            if directive is None:
                flags.append("llm_fallback")

        if directive is None:
            try:
                directive = propose_directive(
                    phase, ahk, spec, current.design, objective,
                    visited, failures, evaluator.consts, aggressiveness,
                )
                nxt, clamp_flags = apply_directive(spec, current.design, directive)
                flags.extend(clamp_flags)
            except ExhaustedError:
                # restart from a fresh random design, recorded as such
                nxt = None
                for _ in range(1000):
                    cand = random_design(spec, rng)
                    if cand.astuple() not in visited:
                        nxt = cand
                        break
                if nxt is None:
                    break  # lattice effectively exhausted
                current = record(nxt, None, "neutral", "restart", ("restart",))
                round_idx += 1
                continue

        prev = current
        sample = record(nxt, directive, "neutral", "step", flags)
        outcome = _classify(prev.metrics.normalized(), sample.metrics.normalized(), objective, improve_margin)
        sample.outcome = outcome
        if outcome == "failed":
            failures.add(directive)
        refine_pair(ahk, spec, prev, sample, refine_alpha)
        if outcome != "failed":
            current = sample
        round_idx += 1

    return LoopResult(trajectory=trajectory, archive=archive, influence=ahk, failures=failures)
