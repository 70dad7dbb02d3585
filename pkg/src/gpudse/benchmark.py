"""Multiple-choice benchmark over three architecture-reasoning tasks.

Task families: bottleneck analysis (which single-parameter step best
improves a stated objective given stall shares), performance/area
prediction (infer a held-out design's metric from worked examples and the
area formula), and parameter tuning (pick the best constrained design).
Every question's answer key is established by exhaustive re-evaluation at
generation time, and stored evidence allows independent re-verification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import llm as llm_mod
from . import prompts
from .perfmodel import CalibrationConstants, Evaluator
from .space import DesignPoint, PARAM_NAMES, SpaceSpec, random_design, step_neighbor, steps_between

TASKS = ("bottleneck", "prediction", "tuning")

# Parameters that structurally relieve each bottleneck resource, in the
# order a rule-following agent prefers them (strongest lever first).
HELPFUL = {
    "memory_bw": ("mem_channels", "sram_kb", "global_buffer_mb"),
    "interconnect": ("link_count",),
    "tensor_compute": ("systolic_dim", "core_count", "sublane_count"),
    "vector_compute": ("vector_width", "core_count", "sublane_count"),
}


class DegenerateDraw(Exception):
    """A draw produced no usable question within the retry bound."""


class AgentFailure(Exception):
    """An agent could not produce an option index."""


def round_sig3(x: float) -> float:
    return float(f"{x:.3g}")


def fmt_sig3(x: float) -> str:
    return f"{x:.3g}"


@dataclass
class BenchmarkQuestion:
    task: str
    prompt: str
    options: tuple[str, ...]
    answer_index: int
    context: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "prompt": self.prompt,
            "options": list(self.options),
            "answer_index": self.answer_index,
            "context": self.context,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkQuestion":
        return cls(
            task=d["task"],
            prompt=d["prompt"],
            options=tuple(d["options"]),
            answer_index=int(d["answer_index"]),
            context=d["context"],
            provenance=d["provenance"],
        )


@dataclass
class BenchmarkSuite:
    questions: list[BenchmarkQuestion]
    counts: dict[str, int]
    seed: int

    def by_task(self, task: str) -> list[BenchmarkQuestion]:
        return [q for q in self.questions if q.task == task]

    def to_json(self, path: str | Path) -> None:
        doc = {
            "seed": self.seed,
            "counts": self.counts,
            "questions": [q.to_dict() for q in self.questions],
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchmarkSuite":
        doc = json.loads(Path(path).read_text())
        return cls(
            questions=[BenchmarkQuestion.from_dict(q) for q in doc["questions"]],
            counts={k: int(v) for k, v in doc["counts"].items()},
            seed=int(doc["seed"]),
        )


def _objective_value(metrics, objective: str) -> float:
    return {"ttft": metrics.ttft_n, "tpot": metrics.tpot_n}[objective]


def _design_line(d: DesignPoint) -> str:
    return json.dumps(d.as_dict(), sort_keys=True)


def area_formula_text(consts: CalibrationConstants) -> str:
    return (
        "area_mm2 = core_count * (a_core_base + sublane_count * (a_pe * systolic_dim^2 "
        "+ a_lane * vector_width) + a_sram * sram_kb) + a_gb * global_buffer_mb "
        "+ a_mem * mem_channels + a_link * link_count, with "
        f"a_core_base={consts.a_core_base!r}, a_pe={consts.a_pe!r}, a_lane={consts.a_lane!r}, "
        f"a_sram={consts.a_sram!r}, a_gb={consts.a_gb!r}, a_mem={consts.a_mem!r}, "
        f"a_link={consts.a_link!r}"
    )


ROOFLINE_NOTE = (
    "Latencies follow a roofline over a sequential operator chain: each "
    "operator is bound by the slowest of its compute, DRAM, or interconnect "
    "time; phase latency is the sum over operators."
)


def gen_bottleneck(rng: np.random.Generator, evaluator: Evaluator, spec: SpaceSpec,
                   max_retries: int = 50) -> BenchmarkQuestion:
    """Single-parameter adjustment question keyed by exhaustive one-step
    re-evaluation; the uniquely best option is the answer."""
    for _ in range(max_retries):
        base = random_design(spec, rng)
        objective = "ttft" if rng.random() < 0.5 else "tpot"
        base_metrics, report = evaluator.evaluate(base)
        phase = report.phase("prefill" if objective == "ttft" else "decode")
        moves = []
        for p in PARAM_NAMES:
            for delta in (+1, -1):
                try:
                    moves.append((p, delta, step_neighbor(spec, base, p, delta)))
                except Exception:
                    continue
        rng.shuffle(moves)
        picked = moves[:4]
        if len(picked) < 4:
            continue
        base_obj = _objective_value(base_metrics, objective)
        evals = []
        for p, delta, d in picked:
            m, _ = evaluator.evaluate(d)
            evals.append(_objective_value(m, objective))
        improvements = [base_obj - v for v in evals]
        if sum(1 for imp in improvements if imp != 0.0) < 2:
            continue
        order = sorted(range(4), key=lambda i: -improvements[i])
        if improvements[order[0]] <= improvements[order[1]]:
            continue  # tie: no unique key
        answer = order[0]
        options = tuple(
            f"{'increase' if delta > 0 else 'decrease'} {p} by one step" for p, delta, _ in picked
        )
        prompt = "\n".join(
            [
                f"Architecture configuration: {_design_line(base)}",
                f"Optimization objective: minimize {objective} "
                f"({'prefill' if objective == 'ttft' else 'decode'} latency, normalized).",
                "Observed stall shares: "
                + json.dumps({k: round(v, 6) for k, v in phase.stall_shares.items()}, sort_keys=True),
                f"Dominant bottleneck: {phase.dominant_resource}",
                "Which single adjustment improves the objective most?",
            ]
            + [f"{chr(65 + i)}. {opt}" for i, opt in enumerate(options)]
        )
        return BenchmarkQuestion(
            task="bottleneck",
            prompt=prompt,
            options=options,
            answer_index=answer,
            context={
                "design": base.as_dict(),
                "objective": objective,
                "stall_shares": phase.stall_shares,
                "dominant": phase.dominant_resource,
                "moves": [[p, delta] for p, delta, _ in picked],
            },
            provenance={
                "base_objective": base_obj,
                "option_objectives": evals,
            },
        )
    raise DegenerateDraw("bottleneck: no non-degenerate draw within retry bound")


def gen_prediction(rng: np.random.Generator, evaluator: Evaluator, spec: SpaceSpec,
                   k_examples: int = 4, multipliers: tuple[float, ...] = (0.7, 1.2, 1.5),
                   max_retries: int = 50) -> BenchmarkQuestion:
    """Metric inference from worked examples spanning the changed
    parameters; distractors are fixed multiples of the key rounded to
    three significant digits."""
    if k_examples < 2:
        raise ValueError("k_examples must be >= 2")
    metric_of = {
        "area": lambda m: m.area_mm2,
        "ttft": lambda m: m.ttft_s,
        "tpot": lambda m: m.tpot_s,
    }
    for _ in range(max_retries):
        metric = ("area", "area", "ttft", "tpot")[rng.integers(4)]
        base = random_design(spec, rng)
        n_changed = 1 + int(rng.random() < 0.5)
        changed = list(rng.choice(len(PARAM_NAMES), size=n_changed, replace=False))
        changed = [PARAM_NAMES[i] for i in changed]

        exemplars: list[DesignPoint] = [base]
        step_pattern = (1, -1, 2, -2)
        ok = True
        for i in range(k_examples - 1):
            p = changed[i % len(changed)]
            delta = step_pattern[(i // len(changed)) % len(step_pattern)]
            try:
                exemplars.append(step_neighbor(spec, base, p, delta))
            except Exception:
                ok = False
                break
        if not ok or len({d.astuple() for d in exemplars}) != len(exemplars):
            continue

        query = base
        for p in changed:
            steps = int(rng.integers(1, 3)) * (1 if rng.random() < 0.5 else -1)
            try:
                query = step_neighbor(spec, query, p, steps)
            except Exception:
                pass
        if query.astuple() in {d.astuple() for d in exemplars[1:]}:
            # asking an already-shown design is fine only via the base
            if query != base:
                continue

        fn = metric_of[metric]
        ex_values = [fn(evaluator.evaluate(d)[0]) for d in exemplars]
        key = fn(evaluator.evaluate(query)[0])
        raw = [key] + [key * m for m in multipliers]
        strings = [fmt_sig3(v) for v in raw]
        if len(set(strings)) != 4:
            continue
        order = list(rng.permutation(4))
        options = tuple(strings[i] for i in order)
        answer = order.index(0)
        unit = {"area": "mm^2", "ttft": "s", "tpot": "s"}[metric]
        model_text = area_formula_text(evaluator.consts) if metric == "area" else ROOFLINE_NOTE
        lines = [
            f"Analytical model: {model_text}",
            "Observed designs and their measured "
            f"{metric} ({unit}):",
        ]
        for d, v in zip(exemplars, ex_values):
            lines.append(f"  {_design_line(d)} -> {v!r}")
        lines.append(f"Predict {metric} ({unit}) for: {_design_line(query)}")
        lines += [f"{chr(65 + i)}. {opt}" for i, opt in enumerate(options)]
        return BenchmarkQuestion(
            task="prediction",
            prompt="\n".join(lines),
            options=options,
            answer_index=answer,
            context={
                "metric": metric,
                "exemplars": [[d.as_dict(), v] for d, v in zip(exemplars, ex_values)],
                "query_design": query.as_dict(),
                "option_values": [float(s) for s in options],
            },
            provenance={"exact_value": key},
        )
    raise DegenerateDraw("prediction: no non-degenerate draw within retry bound")


def gen_tuning(rng: np.random.Generator, evaluator: Evaluator, spec: SpaceSpec,
               max_retries: int = 50) -> BenchmarkQuestion:
    """Constrained selection among whole designs near an initial point; the
    key is the feasible option with the best objective, and at least one
    option must violate the area bound."""
    for _ in range(max_retries):
        initial = random_design(spec, rng)
        objective = "ttft" if rng.random() < 0.5 else "tpot"
        init_metrics, _ = evaluator.evaluate(initial)

        candidates: list[DesignPoint] = []
        if rng.random() < 0.5:
            candidates.append(initial)
        tries = 0
        while len(candidates) < 4 and tries < 40:
            tries += 1
            d = initial
            for _ in range(1 + int(rng.integers(2))):
                p = PARAM_NAMES[rng.integers(len(PARAM_NAMES))]
                steps = int(rng.integers(1, 3)) * (1 if rng.random() < 0.5 else -1)
                try:
                    d = step_neighbor(spec, d, p, steps)
                except Exception:
                    continue
            if d.astuple() not in {c.astuple() for c in candidates}:
                candidates.append(d)
        if len(candidates) < 4:
            continue
        options_d = candidates[:4]
        evals = [evaluator.evaluate(d)[0] for d in options_d]
        areas = sorted({m.area_n for m in evals})
        if len(areas) < 2:
            continue
        cut = int(rng.integers(len(areas) - 1))
        bound = (areas[cut] + areas[cut + 1]) / 2.0
        feasible = [i for i, m in enumerate(evals) if m.area_n <= bound]
        if not feasible or len(feasible) == 4:
            continue
        objs = {i: _objective_value(evals[i], objective) for i in feasible}
        best = min(feasible, key=lambda i: objs[i])
        if sum(1 for i in feasible if objs[i] == objs[best]) > 1:
            continue  # tied key
        # exploration history spans every parameter the options change, so
        # finite differences against the initial design can rank them
        changed_params = [
            p for p in PARAM_NAMES
            if any(d.get(p) != initial.get(p) for d in options_d)
        ]
        traj_designs = [initial]
        for p in changed_params:
            for delta in (+1, -1):
                try:
                    traj_designs.append(step_neighbor(spec, initial, p, delta))
                    break
                except Exception:
                    continue
        trajectory = []
        for d in traj_designs:
            m, _ = evaluator.evaluate(d)
            trajectory.append([d.as_dict(), {"ttft_n": m.ttft_n, "tpot_n": m.tpot_n, "area_n": m.area_n}])
        options = tuple(_design_line(d) for d in options_d)
        prompt = "\n".join(
            [
                f"Initial design: {_design_line(initial)}",
                f"Constraint: normalized area <= {bound!r}",
                f"Objective: minimize normalized {objective}.",
                "Exploration history (design -> normalized metrics):",
            ]
            + [f"  {json.dumps(d, sort_keys=True)} -> {json.dumps(m, sort_keys=True)}" for d, m in trajectory]
            + ["Pick the design that best meets the objective within the constraint:"]
            + [f"{chr(65 + i)}. {opt}" for i, opt in enumerate(options)]
        )
        return BenchmarkQuestion(
            task="tuning",
            prompt=prompt,
            options=options,
            answer_index=best,
            context={
                "initial_design": initial.as_dict(),
                "objective": objective,
                "area_bound": bound,
                "option_designs": [d.as_dict() for d in options_d],
                "trajectory": trajectory,
            },
            provenance={
                "option_metrics": [
                    {"ttft_n": m.ttft_n, "tpot_n": m.tpot_n, "area_n": m.area_n} for m in evals
                ],
            },
        )
    raise DegenerateDraw("tuning: no non-degenerate draw within retry bound")


_GENERATORS = {"bottleneck": gen_bottleneck, "prediction": gen_prediction, "tuning": gen_tuning}


def generate_suite(spec: SpaceSpec, evaluator: Evaluator, counts: dict[str, int], seed: int,
                   k_examples: int = 4, multipliers: tuple[float, ...] = (0.7, 1.2, 1.5),
                   max_retries: int = 50) -> BenchmarkSuite:
    """Deterministic suite: each question draws from its own seed stream,
    so generation order (or parallelism) cannot change content."""
    questions: list[BenchmarkQuestion] = []
    for t_idx, task in enumerate(TASKS):
        for i in range(int(counts.get(task, 0))):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), t_idx, i]))
            if task == "prediction":
                q = gen_prediction(rng, evaluator, spec, k_examples, tuple(multipliers), max_retries)
            else:
                q = _GENERATORS[task](rng, evaluator, spec, max_retries)
            questions.append(q)
    return BenchmarkSuite(questions=questions, counts={t: int(counts.get(t, 0)) for t in TASKS}, seed=seed)


def verify_question(q: BenchmarkQuestion, evaluator: Evaluator, spec: SpaceSpec) -> bool:
    """Independent re-check that the keyed option is uniquely best."""
    if q.task == "bottleneck":
        base = DesignPoint.from_dict(q.context["design"])
        objective = q.context["objective"]
        base_obj = _objective_value(evaluator.evaluate(base)[0], objective)
        vals = []
        for p, delta in q.context["moves"]:
            d = step_neighbor(spec, base, p, int(delta))
            vals.append(_objective_value(evaluator.evaluate(d)[0], objective))
        imps = [base_obj - v for v in vals]
        best = max(range(len(imps)), key=lambda i: imps[i])
        unique = sum(1 for x in imps if x == imps[best]) == 1
        return unique and best == q.answer_index
    if q.task == "prediction":
        metric = q.context["metric"]
        query = DesignPoint.from_dict(q.context["query_design"])
        m, _ = evaluator.evaluate(query)
        value = {"area": m.area_mm2, "ttft": m.ttft_s, "tpot": m.tpot_s}[metric]
        opts = q.context["option_values"]
        best = min(range(len(opts)), key=lambda i: abs(opts[i] - value))
        return best == q.answer_index
    if q.task == "tuning":
        objective = q.context["objective"]
        bound = q.context["area_bound"]
        evals = [evaluator.evaluate(DesignPoint.from_dict(d))[0] for d in q.context["option_designs"]]
        feasible = [i for i, m in enumerate(evals) if m.area_n <= bound]
        if not feasible or len(feasible) == len(evals):
            return False
        best = min(feasible, key=lambda i: _objective_value(evals[i], objective))
        return best == q.answer_index
    raise ValueError(f"unknown task {q.task!r}")


# ---------------------------------------------------------------------------
# Agents


class OracleAgent:
    """Re-evaluates every option with the analytic model; scores 1.0 by
    key-soundness construction."""

    def __init__(self, evaluator: Evaluator, spec: SpaceSpec):
        self.evaluator = evaluator
        self.spec = spec

    def answer(self, q: BenchmarkQuestion, rules: str = "original") -> int:
        if q.task == "bottleneck":
            base = DesignPoint.from_dict(q.context["design"])
            objective = q.context["objective"]
            vals = []
            for p, delta in q.context["moves"]:
                d = step_neighbor(self.spec, base, p, int(delta))
                vals.append(_objective_value(self.evaluator.evaluate(d)[0], objective))
            return min(range(len(vals)), key=lambda i: vals[i])
        if q.task == "prediction":
            metric = q.context["metric"]
            m, _ = self.evaluator.evaluate(DesignPoint.from_dict(q.context["query_design"]))
            value = {"area": m.area_mm2, "ttft": m.ttft_s, "tpot": m.tpot_s}[metric]
            opts = q.context["option_values"]
            return min(range(len(opts)), key=lambda i: abs(opts[i] - value))
        if q.task == "tuning":
            objective = q.context["objective"]
            bound = q.context["area_bound"]
            evals = [
                self.evaluator.evaluate(DesignPoint.from_dict(d))[0]
                for d in q.context["option_designs"]
            ]
            feasible = [i for i, m in enumerate(evals) if m.area_n <= bound]
            pool = feasible or list(range(len(evals)))
            return min(pool, key=lambda i: _objective_value(evals[i], objective))
        raise AgentFailure(f"unknown task {q.task!r}")


class RandomAgent:
    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def answer(self, q: BenchmarkQuestion, rules: str = "original") -> int:
        return int(self.rng.integers(len(q.options)))


class RuleAgent:
    """Scripted agent. With rules="enhanced" it follows the corrective
    discipline (dominant bottleneck only, deltas from the reference
    exemplar, constraint first); with rules="original" it reproduces the
    systematic failure modes those rules exist to fix (compute chasing,
    zero-baseline deltas, constraint blindness)."""

    def __init__(self, spec: SpaceSpec):
        self.spec = spec

    # -- shared helpers -----------------------------------------------------
    def _slopes(self, base_design: dict, base_vals: dict, rows: list) -> dict:
        """Per-parameter finite differences from single-step exemplars."""
        base = DesignPoint.from_dict(base_design)
        slopes: dict[str, dict[str, float]] = {}
        for design_d, vals in rows:
            d = DesignPoint.from_dict(design_d)
            diff = [p for p in PARAM_NAMES if d.get(p) != base.get(p)]
            if len(diff) != 1:
                continue
            p = diff[0]
            steps = steps_between(self.spec, p, base.get(p), d.get(p))
            if steps == 0:
                continue
            for metric, v in vals.items():
                slopes.setdefault(p, {})[metric] = (v - base_vals[metric]) / steps
        return slopes

    def _estimate(self, base_design: dict, base_vals: dict, slopes: dict, target: dict,
                  zero_baseline: bool) -> dict:
        base = DesignPoint.from_dict(base_design)
        tgt = DesignPoint.from_dict(target)
        est = dict(base_vals)
        for p, per_metric in slopes.items():
            if zero_baseline:
                # failure mode: treats the parameter's absolute lattice
                # position as the delta instead of steps from the reference
                vals = self.spec.values(p)
                v = tgt.get(p)
                steps = vals.index(v) if v in vals else int(np.searchsorted(vals, v))
            else:
                steps = steps_between(self.spec, p, base.get(p), tgt.get(p))
            for metric, slope in per_metric.items():
                est[metric] = est.get(metric, 0.0) + slope * steps
        return est

    # -- per-task policies ---------------------------------------------------
    def _bottleneck(self, q: BenchmarkQuestion, enhanced: bool) -> int:
        moves = q.context["moves"]
        if enhanced:
            helpful = HELPFUL[q.context["dominant"]]
            for pref in helpful:
                for i, (p, delta) in enumerate(moves):
                    if p == pref and delta > 0:
                        return i
            for i, (p, delta) in enumerate(moves):
                if p in helpful:
                    return i
            return 0
        for pref in ("core_count", "systolic_dim", "sublane_count"):
            for i, (p, delta) in enumerate(moves):
                if p == pref and delta > 0:
                    return i
        return 0

    def _prediction(self, q: BenchmarkQuestion, enhanced: bool) -> int:
        metric = q.context["metric"]
        exemplars = q.context["exemplars"]
        base_design, base_val = exemplars[0]
        rows = [(d, {metric: v}) for d, v in exemplars[1:]]
        slopes = self._slopes(base_design, {metric: base_val}, rows)
        est = self._estimate(
            base_design, {metric: base_val}, slopes, q.context["query_design"],
            zero_baseline=not enhanced,
        )[metric]
        opts = q.context["option_values"]
        return min(range(len(opts)), key=lambda i: abs(opts[i] - est))

    def _tuning(self, q: BenchmarkQuestion, enhanced: bool) -> int:
        traj = q.context["trajectory"]
        base_design, base_vals = traj[0]
        slopes = self._slopes(base_design, base_vals, traj[1:])
        objective = q.context["objective"] + "_n"
        ests = [
            self._estimate(base_design, base_vals, slopes, d, zero_baseline=not enhanced)
            for d in q.context["option_designs"]
        ]
        if enhanced:
            feasible = [i for i, e in enumerate(ests) if e["area_n"] <= q.context["area_bound"]]
            pool = feasible or list(range(len(ests)))
            return min(pool, key=lambda i: ests[i][objective])
        return min(range(len(ests)), key=lambda i: ests[i][objective])

    def answer(self, q: BenchmarkQuestion, rules: str = "original") -> int:
        enhanced = rules == "enhanced"
        if q.task == "bottleneck":
            return self._bottleneck(q, enhanced)
        if q.task == "prediction":
            return self._prediction(q, enhanced)
        if q.task == "tuning":
            return self._tuning(q, enhanced)
        raise AgentFailure(f"unknown task {q.task!r}")


class LlmAgent:
    """Chat-completion agent; the enhanced mode prepends the corrective
    rules to the system prompt."""

    def __init__(self, backend):
        self.backend = backend

    def answer(self, q: BenchmarkQuestion, rules: str = "original") -> int:
        req = llm_mod.ChatRequest(
            system_prompt=prompts.bench_system_prompt(rules),
            messages=(("user", q.prompt),),
            temperature=0.0,
        )
        try:
            reply = llm_mod.complete(req, self.backend)
            return llm_mod.parse_answer_index(reply, len(q.options))
        except llm_mod.LlmError as exc:
            raise AgentFailure(str(exc)) from exc


@dataclass
class ScoreReport:
    accuracy: dict[str, float]
    correct: dict[str, int]
    total: dict[str, int]
    rows: list[dict] = field(default_factory=list)

    @property
    def overall(self) -> float:
        c = sum(self.correct.values())
        t = sum(self.total.values())
        return c / t if t else 0.0

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "overall": self.overall,
        }


def score(suite: BenchmarkSuite, agent, rules: str = "original") -> ScoreReport:
    """Per-task accuracy; an agent failure counts as incorrect, never
    aborts the run."""
    if rules not in ("original", "enhanced"):
        raise ValueError(f"rules must be 'original' or 'enhanced', got {rules!r}")
    correct = {t: 0 for t in TASKS}
    total = {t: 0 for t in TASKS}
    rows = []
    for i, q in enumerate(suite.questions):
        total[q.task] += 1
        try:
            picked = int(agent.answer(q, rules))
        except AgentFailure as exc:
            rows.append({"index": i, "task": q.task, "picked": None, "correct": False, "error": str(exc)})
            continue
        ok = picked == q.answer_index
        correct[q.task] += ok
        rows.append({"index": i, "task": q.task, "picked": picked, "correct": bool(ok)})
    accuracy = {t: (correct[t] / total[t] if total[t] else 0.0) for t in TASKS}
    return ScoreReport(accuracy=accuracy, correct=correct, total=total, rows=rows)
