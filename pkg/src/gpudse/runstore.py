"""Run persistence and reporting.

Each exploration run owns a directory named method_seed_timestamp holding
a manifest (full config embedded, so a run replays from its manifest
alone), an append-only JSONL trajectory with one record per evaluated
sample, the final Pareto archive, and a hypervolume-vs-samples CSV.
Reports are pure functions of the stored files.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from pathlib import Path

from . import __version__ as package_version
from .benchmark import BenchmarkSuite, generate_suite
from .config import ConfigError, config_hash, make_space
from .influence import build_structural_map, measure_sensitivity
from .loop import TrajectorySample, run_loop
from .optimizers import ALIASES, BudgetExhausted, METHODS, make_optimizer
from .pareto import ParetoArchive, hypervolume, sample_efficiency, strictly_better, write_phv_curve
from .perfmodel import Evaluator
from .prompts import PROMPT_VERSION
from .space import DesignPoint

GUIDED_METHOD = "guided"
ALL_METHODS = (GUIDED_METHOD,) + METHODS


class MissingRun(Exception):
    """A report was requested over absent or incomplete run directories."""


def canonical_method(name: str) -> str:
    method = ALIASES.get(name, name)
    if method not in ALL_METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {ALL_METHODS} or aliases {tuple(ALIASES)}")
    return method


def sample_record(s: TrajectorySample) -> dict:
    return {
        "step": s.step,
        "kind": s.kind,
        "design": s.design.as_dict(),
        "metrics": {
            "ttft_s": s.metrics.ttft_s,
            "tpot_s": s.metrics.tpot_s,
            "area_mm2": s.metrics.area_mm2,
            "ttft_n": s.metrics.ttft_n,
            "tpot_n": s.metrics.tpot_n,
            "area_n": s.metrics.area_n,
        },
        "stalls": {
            "prefill": s.report.prefill.stall_shares,
            "decode": s.report.decode.stall_shares,
        },
        "dominant": {
            "prefill": s.report.prefill.dominant_resource,
            "decode": s.report.decode.dominant_resource,
        },
        "directive": s.directive.to_record() if s.directive else None,
        "outcome": s.outcome,
        "dominates_reference": s.dominates_reference,
        "flags": list(s.flags),
    }


def record_line(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def create_run_dir(base: str | Path, method: str, seed: int) -> Path:
    base = Path(base)
    base.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    candidate = base / f"{method}_{seed}_{stamp}"
    n = 0
    while candidate.exists():
        n += 1
        if n > 999:
            raise FileExistsError(f"cannot allocate run directory under {base}")
        candidate = base / f"{method}_{seed}_{stamp}_{n}"
    candidate.mkdir()
    return candidate


def _explore_samples(cfg: dict, method: str, budget: int, seed: int, backend: str,
                     gateway=None, llm_log: list | None = None) -> list[TrajectorySample]:
    spec = make_space(cfg)
    evaluator = Evaluator.from_config(cfg, spec)
    if method == GUIDED_METHOD:
        loop_cfg = cfg["loop"]
        result = run_loop(
            spec,
            evaluator,
            initial=spec.reference_design,
            budget=budget,
            backend=backend,
            seed=seed,
            aggressiveness=int(loop_cfg["aggressiveness"]),
            alternation_threshold=float(loop_cfg["alternation_threshold"]),
            improve_margin=float(loop_cfg["improve_margin"]),
            refine_alpha=float(loop_cfg["refine_alpha"]),
            sensitivity_perturbs_performance=bool(loop_cfg["sensitivity_perturbs_performance"]),
            gateway_backend=gateway,
            llm_log=llm_log,
        )
        return result.trajectory

    options = dict(cfg["optimizer"].get(method, {}))
    if method == "grid":
        options.setdefault("budget", budget)
        options["budget"] = min(int(options["budget"]), budget) or budget
    opt = make_optimizer(method, spec, seed, options)
    samples: list[TrajectorySample] = []
    while len(samples) < budget:
        try:
            design = opt.propose(1)[0]
        except BudgetExhausted:
            break
        metrics, report = evaluator.evaluate(design)
        opt.observe(design, metrics.normalized())
        samples.append(
            TrajectorySample(
                step=len(samples),
                design=design,
                metrics=metrics,
                report=report,
                directive=None,
                outcome="neutral",
                dominates_reference=strictly_better(metrics.normalized(), (1.0, 1.0, 1.0)),
                kind="step" if samples else "initial",
            )
        )
    return samples


def run_explore(cfg: dict, method: str, budget: int, seed: int, backend: str = "rule",
                out_base: str | Path = "runs", gateway=None) -> Path:
    """Execute one exploration run and persist it. Returns the run directory."""
    method = canonical_method(method)
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    if backend not in ("rule", "llm"):
        raise ConfigError(f"unknown backend {backend!r}")

    llm_log: list = []
    samples = _explore_samples(cfg, method, budget, seed, backend, gateway, llm_log)

    run_dir = create_run_dir(out_base, method, seed)
    manifest = {
        "method": method,
        "seed": seed,
        "budget": budget,
        "backend": backend if method == GUIDED_METHOD else "rule",
        "model_name": getattr(gateway, "model", "") if gateway is not None else "",
        "config": cfg,
        "config_hash": config_hash(cfg),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "package_version": package_version,
        "prompt_version": PROMPT_VERSION,
        "samples_evaluated": len(samples),
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    archive = ParetoArchive(reference=(1.0, 1.0, 1.0))
    curve = []
    with open(run_dir / "trajectory.jsonl", "w") as fh:
        for s in samples:
            fh.write(record_line(sample_record(s)) + "\n")
            archive.insert(s.design, s.metrics.normalized())
            curve.append((s.step, archive.hypervolume()))
    archive.dump(run_dir / "pareto.json")
    write_phv_curve(run_dir / "phv_curve.csv", curve)
    if llm_log:
        with open(run_dir / "llm_log.jsonl", "w") as fh:
            for entry in llm_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return run_dir


def read_trajectory(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / "trajectory.jsonl"
    if not path.exists():
        raise MissingRun(f"{run_dir} has no trajectory.jsonl")
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def read_manifest(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise MissingRun(f"{run_dir} has no manifest.json")
    return json.loads(path.read_text())


def replay_trajectory(run_dir: str | Path, gateway=None) -> str:
    """Re-execute a run from its manifest and return the trajectory text it
    would write; byte-identical to the stored file for rule-backend runs."""
    m = read_manifest(run_dir)
    samples = _explore_samples(
        m["config"], m["method"], int(m["budget"]), int(m["seed"]), m["backend"], gateway
    )
    return "".join(record_line(sample_record(s)) + "\n" for s in samples)


def run_report(run_dirs: list[str | Path], out_dir: str | Path) -> dict:
    """Aggregate stored runs into per-method mean/std hypervolume and
    sample efficiency, per-run curves, and the pooled Pareto table."""
    if not run_dirs:
        raise MissingRun("no run directories given")
    per_run = []
    for rd in run_dirs:
        manifest = read_manifest(rd)
        records = read_trajectory(rd)
        if not records:
            raise MissingRun(f"{rd} has an empty trajectory")
        objs = [
            (r["metrics"]["ttft_n"], r["metrics"]["tpot_n"], r["metrics"]["area_n"])
            for r in records
        ]
        archive = ParetoArchive(reference=(1.0, 1.0, 1.0))
        curve = []
        for r, o in zip(records, objs):
            archive.insert(DesignPoint.from_dict(r["design"]), o)
            curve.append((r["step"], archive.hypervolume()))
        per_run.append(
            {
                "run_dir": str(rd),
                "method": manifest["method"],
                "seed": manifest["seed"],
                "samples": len(records),
                "phv": archive.hypervolume(),
                "sample_efficiency": sample_efficiency(objs, (1.0, 1.0, 1.0)),
                "superior_designs": sum(1 for r in records if r["dominates_reference"]),
                "curve": curve,
                "front": [
                    {"design": d.as_dict(), "objectives": list(o)} for d, o in archive.entries
                ],
            }
        )

    methods: dict[str, list[dict]] = {}
    for run in per_run:
        methods.setdefault(run["method"], []).append(run)
    summary = []
    for method, runs in methods.items():
        phvs = [r["phv"] for r in runs]
        ses = [r["sample_efficiency"] for r in runs]
        summary.append(
            {
                "method": method,
                "runs": len(runs),
                "mean_phv": statistics.fmean(phvs),
                "std_phv": statistics.pstdev(phvs) if len(phvs) > 1 else 0.0,
                "mean_sample_efficiency": statistics.fmean(ses),
                "std_sample_efficiency": statistics.pstdev(ses) if len(ses) > 1 else 0.0,
                "mean_superior_designs": statistics.fmean(r["superior_designs"] for r in runs),
            }
        )
    summary.sort(key=lambda row: -row["mean_phv"])

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "summary": summary,
        "runs": [{k: v for k, v in r.items() if k not in ("curve", "front")} for r in per_run],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "runs", "mean_phv", "std_phv", "mean_sample_efficiency",
                    "std_sample_efficiency", "mean_superior_designs"])
        for row in summary:
            w.writerow([row["method"], row["runs"], repr(row["mean_phv"]), repr(row["std_phv"]),
                        repr(row["mean_sample_efficiency"]), repr(row["std_sample_efficiency"]),
                        repr(row["mean_superior_designs"])])
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "step", "hypervolume"])
        for run in per_run:
            for step, hv in run["curve"]:
                w.writerow([run["method"], run["seed"], step, repr(hv)])
    with open(out / "pareto.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        from .space import PARAM_NAMES

        w.writerow(["method", "seed"] + list(PARAM_NAMES) + ["ttft_n", "tpot_n", "area_n"])
        for run in per_run:
            for entry in run["front"]:
                w.writerow(
                    [run["method"], run["seed"]]
                    + [entry["design"][p] for p in PARAM_NAMES]
                    + [repr(x) for x in entry["objectives"]]
                )
    return report


def sensitivity_table(cfg: dict) -> list[dict]:
    """One-step sensitivity study around the reference design."""
    spec = make_space(cfg)
    evaluator = Evaluator.from_config(cfg, spec)
    ahk = build_structural_map(spec)
    measure_sensitivity(
        spec, spec.reference_design, evaluator, ahk,
        perturb_performance=bool(cfg["loop"]["sensitivity_perturbs_performance"]),
    )
    return ahk.to_table()


def run_bench_gen(cfg: dict, counts: dict[str, int], seed: int, out_path: str | Path) -> BenchmarkSuite:
    spec = make_space(cfg)
    evaluator = Evaluator.from_config(cfg, spec)
    bench_cfg = cfg["benchmark"]
    suite = generate_suite(
        spec,
        evaluator,
        counts,
        seed,
        k_examples=int(bench_cfg["prediction_examples"]),
        multipliers=tuple(bench_cfg["distractor_multipliers"]),
        max_retries=int(bench_cfg["max_draw_retries"]),
    )
    suite.to_json(out_path)
    return suite
