"""Command-line entry points: explore, report, sensitivity, bench gen/eval.

LLM credentials come from the environment only (GPUDSE_LLM_BASE_URL,
GPUDSE_LLM_API_KEY, GPUDSE_LLM_MODEL), never from flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .benchmark import BenchmarkSuite, LlmAgent, OracleAgent, RandomAgent, RuleAgent, score
from .config import ConfigError, load_config, make_space
from .perfmodel import Evaluator
from .runstore import run_bench_gen, run_explore, run_report, sensitivity_table


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def _make_gateway():
    from .llm import HttpBackend

    return HttpBackend()


def cmd_explore(args) -> int:
    cfg = load_config(args.config)
    gateway = _make_gateway() if args.backend == "llm" else None
    for seed in _parse_seeds(args.seed):
        run_dir = run_explore(
            cfg, args.method, args.budget, seed,
            backend=args.backend, out_base=args.out, gateway=gateway,
        )
        print(run_dir)
    return 0


def cmd_report(args) -> int:
    report = run_report(args.run_dirs, args.out)
    for row in report["summary"]:
        print(
            f"{row['method']}: mean PHV {row['mean_phv']:.6f} "
            f"(std {row['std_phv']:.6f}), mean sample efficiency "
            f"{row['mean_sample_efficiency']:.4f} over {row['runs']} run(s)"
        )
    print(f"report written to {args.out}")
    return 0


def cmd_sensitivity(args) -> int:
    cfg = load_config(args.config)
    rows = sensitivity_table(cfg)
    out = Path(args.out)
    if out.suffix == ".json":
        out.write_text(json.dumps(rows, indent=2, sort_keys=True))
    else:
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["parameter", "metric", "sign", "magnitude", "source"])
            w.writeheader()
            w.writerows(rows)
    print(out)
    return 0


def cmd_bench_gen(args) -> int:
    cfg = load_config(args.config)
    try:
        b, p, t = (int(x) for x in args.counts.split(","))
    except ValueError:
        raise ConfigError(f"--counts expects three comma-separated integers, got {args.counts!r}")
    suite = run_bench_gen(
        cfg, {"bottleneck": b, "prediction": p, "tuning": t}, args.seed, args.out
    )
    print(f"{len(suite.questions)} questions written to {args.out}")
    return 0


def cmd_bench_eval(args) -> int:
    cfg = load_config(args.config)
    suite = BenchmarkSuite.from_json(args.suite)
    spec = make_space(cfg)
    evaluator = Evaluator.from_config(cfg, spec)
    if args.agent == "oracle":
        agent = OracleAgent(evaluator, spec)
    elif args.agent == "random":
        agent = RandomAgent(args.seed)
    elif args.agent == "rule":
        agent = RuleAgent(spec)
    elif args.agent == "llm":
        agent = LlmAgent(_make_gateway())
    else:
        raise ConfigError(f"unknown agent {args.agent!r}")
    report = score(suite, agent, rules=args.rules)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    rows_path = out.with_suffix(".rows.csv")
    with open(rows_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["index", "task", "picked", "correct", "error"])
        w.writeheader()
        for row in report.rows:
            w.writerow({**{"error": ""}, **row})
    for task, acc in report.accuracy.items():
        print(f"{task}: {acc:.4f} ({report.correct[task]}/{report.total[task]})")
    print(f"overall: {report.overall:.4f}; report at {out}, per-question rows at {rows_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpudse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="run one exploration method for a sample budget")
    p.add_argument("--method", required=True,
                   help="guided | grid | random_walk | genetic | ant_colony | bayesian (aliases gs, rw, ga, aco, bo)")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed", default="0", help="single seed or inclusive range like 1..5")
    p.add_argument("--backend", choices=("rule", "llm"), default="rule")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("report", help="aggregate stored runs into comparison reports")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sensitivity", help="dump the one-step sensitivity table around the reference")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="sensitivity.csv")
    p.set_defaults(func=cmd_sensitivity)

    bench = sub.add_parser("bench", help="benchmark generation and scoring")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    p = bsub.add_parser("gen", help="generate a question suite with oracle-verified keys")
    p.add_argument("--counts", default="308,127,30", help="bottleneck,prediction,tuning")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="suite.json")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_bench_gen)

    p = bsub.add_parser("eval", help="score an agent on a stored suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--agent", required=True, help="oracle | random | rule | llm")
    p.add_argument("--rules", choices=("original", "enhanced"), default="original")
    p.add_argument("--seed", type=int, default=0, help="seed for the random agent")
    p.add_argument("--out", default="bench_report.json")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_bench_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # MissingRun, DegenerateDraw, ...
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
