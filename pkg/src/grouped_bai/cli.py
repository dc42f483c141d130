"""Command-line entry point.

Exit codes: 0 success, 2 input or validation error, 3 some run hit the pull
budget (results are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import diagnostics, harness, plotting
from .env import parse_seed
from .harness import CUSTOM, POLICY_NAMES, ConfigError, ExperimentConfig
from .instance import (
    DegenerateInstanceError,
    InstanceError,
    ProblemInstance,
    analyze,
    ground_truth_dict,
    load_instance,
    lower_bound,
)
from .results import DEFAULT_BUDGET_CAP, TRACE_FORMAT, RunResult, Trace

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


def _arms(xs) -> str:
    return "{" + ", ".join(str(x) for x in xs) + "}"


def _num(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, str):
        return x
    return f"{x:.6g}"


def _with_kappa(instance: ProblemInstance, kappa: Optional[float]) -> ProblemInstance:
    if kappa is None:
        return instance
    return ProblemInstance(instance.means, instance.threshold, instance.reward_family, kappa)


# -- documents ---------------------------------------------------------------


def analysis_document(instance: ProblemInstance, delta: float) -> dict:
    """Ground truth, hardness and lower bound of ``instance`` (1-based arms)."""
    gt = analyze(instance)
    try:
        lb = lower_bound(instance, gt, delta).to_dict()
    except DegenerateInstanceError:
        lb = None
    return {
        "instance": instance.to_dict(),
        "delta": delta,
        "ground_truth": ground_truth_dict(gt),
        "lower_bound": lb,
    }


def result_document(result: RunResult, seed: int, gt) -> dict:
    return {
        "policy": result.policy,
        "seed": seed,
        "f_hat": int(result.feasibility_flag_hat),
        "i_out": None if result.output_arm is None else result.output_arm + 1,
        "total_pulls": result.total_pulls,
        "rounds": result.rounds,
        "stopped_by_budget": result.stopped_by_budget,
        "correct": result.is_correct(gt),
        "pulls_per_arm": [int(x) for x in result.pulls_matrix[:, 0]],
    }


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


# -- subcommands -------------------------------------------------------------


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    gt = analyze(inst)
    doc = {
        "valid": True,
        "n_arms": inst.n_arms,
        "n_attrs": inst.n_attrs,
        "threshold": inst.threshold,
        "reward_family": inst.reward_family,
        "degenerate": not math.isfinite(gt.hardness),
    }
    if args.json:
        _print_json(doc)
    else:
        note = " (degenerate: a gap is zero, H_id is infinite)" if doc["degenerate"] else ""
        print(f"ok: {inst.n_arms} arms x {inst.n_attrs} attributes, threshold {inst.threshold:g}, "
              f"{inst.reward_family} rewards{note}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    inst = _with_kappa(load_instance(args.instance), args.kappa)
    doc = analysis_document(inst, args.delta)
    if args.json:
        _print_json(doc)
        return EXIT_OK
    g = doc["ground_truth"]
    print(f"instance: {g['n_arms']} arms x {g['n_attrs']} attributes, threshold {g['threshold']:g}, "
          f"{inst.reward_family} rewards")
    print(f"feasible arms F = {_arms(g['feasible'])}  (f = {g['feasibility_flag']})")
    if g["best_arm"] is not None:
        print(f"best feasible arm i* = {g['best_arm']}, runner-up = {g['second_best'] or '-'}")
    else:
        print("no feasible arm: the instance is infeasible")
    print(f"sub-optimal S = {_arms(g['suboptimal'])}, risky R = {_arms(g['risky'])}")
    print(f"{'arm':>4} {'mean':>10} {'gap':>10} {'attr gap':>10}")
    for i in range(g["n_arms"]):
        print(f"{i + 1:>4} {_num(g['arm_means'][i]):>10} {_num(g['gaps'][i]):>10} {_num(g['arm_attr_gaps'][i]):>10}")
    print(f"separator = {_num(g['separator'])}")
    print(f"H_id = {_num(g['hardness'])}")
    lb = doc["lower_bound"]
    if lb is None:
        print("lower bound: undefined (degenerate instance)")
    else:
        flags = [f for f in ("heuristic", "vacuous") if lb[f]]
        extra = f" [{', '.join(flags)}]" if flags else ""
        print(f"lower bound at delta = {args.delta:g}: c1 = {_num(lb['c1'])}, c2 = {_num(lb['c2'])}, "
              f"c3 = {_num(lb['c3'])}, C = {_num(lb['constant'])}, samples >= {_num(lb['samples'])}{extra}")
    return EXIT_OK


def _run_seeds(seed: int, policy: str, reps: int) -> list[int]:
    if reps == 1:
        return [seed]
    return [harness.derive_seed(seed, CUSTOM, 0, policy, r) for r in range(reps)]


def cmd_run(args) -> int:
    inst = _with_kappa(load_instance(args.instance), args.kappa)
    gt = analyze(inst)
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.trace and args.reps != 1:
        raise UsageError("--trace needs --reps 1")
    docs, records = [], []
    for seed in _run_seeds(args.seed, args.policy, args.reps):
        result = harness.run_policy(args.policy, inst, seed, args.delta, budget_cap=args.budget_cap,
                                    record_trace=bool(args.trace))
        if args.trace:
            result.trace.write_jsonl(args.trace)
        docs.append(result_document(result, seed, gt))
        records.append(harness.ExperimentRecord.from_result(CUSTOM, 0, seed, gt, result))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        harness.write_records(records, out / "records.csv")
        harness.write_summary(harness.aggregate(records), out / "summary.csv", out / "summary.json")
    if args.json:
        _print_json(docs[0] if args.reps == 1 else docs)
    else:
        for d in docs:
            out_arm = "none (infeasible)" if d["i_out"] is None else str(d["i_out"])
            flag = "  [budget cap hit]" if d["stopped_by_budget"] else ""
            print(f"{d['policy']} seed={d['seed']}: f_hat={d['f_hat']} i_out={out_arm} "
                  f"pulls={d['total_pulls']} rounds={d['rounds']} correct={d['correct']}{flag}")
    return EXIT_BUDGET if any(d["stopped_by_budget"] for d in docs) else EXIT_OK


def _config_from_args(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config)
    overrides = {}
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.delta is not None:
        overrides["delta"] = args.delta
    if args.policy:
        overrides["policies"] = tuple(args.policy)
    if args.budget_cap is not None:
        overrides["budget_cap"] = args.budget_cap
    if args.kappa is not None:
        overrides["kappa"] = args.kappa
    if overrides:
        doc = cfg.to_dict()
        doc.update(overrides)
        cfg = ExperimentConfig.from_dict(doc)
    return cfg


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    records = harness.run_experiment(cfg, workers=args.workers)
    summary = harness.aggregate(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_records(records, out / "records.csv")
    harness.write_summary(summary, out / "summary.csv", out / "summary.json")
    _print_summary(summary, args.json)
    return EXIT_BUDGET if any(r.stopped_by_budget for r in records) else EXIT_OK


def _print_summary(rows, as_json: bool) -> None:
    if as_json:
        _print_json({"format": harness.SUMMARY_FORMAT, "rows": [r.to_json() for r in rows]})
        return
    print(f"{'experiment':<10} {'value':>8} {'policy':<14} {'reps':>5} {'H_id':>10} "
          f"{'mean pulls':>12} {'std err':>10} {'error':>6} {'capped':>6}")
    for r in rows:
        print(f"{r.experiment_id:<10} {harness.format_value(r.sweep_value):>8} {r.policy:<14} "
              f"{r.replications:>5} {_num(r.hardness):>10} {r.mean_pulls:>12.1f} {r.std_error:>10.1f} "
              f"{r.error_rate:>6.3f} {r.budget_capped:>6}")


def _is_trace(path: Path) -> bool:
    with open(path) as fh:
        first = fh.readline()
    try:
        return json.loads(first).get("format") == TRACE_FORMAT
    except (json.JSONDecodeError, AttributeError):
        return False


def cmd_report(args) -> int:
    path = Path(args.path)
    if _is_trace(path):
        if not args.instance:
            raise UsageError("a trace report needs --instance for the ground truth")
        inst = load_instance(args.instance)
        doc = diagnostics.summarize_run(Trace.read_jsonl(path), analyze(inst), args.delta)
        if args.json:
            _print_json(doc)
        else:
            for k, v in doc.items():
                print(f"{k}: {v}")
        return EXIT_OK
    records = harness.read_records(path)
    if not records:
        raise UsageError(f"{path}: no records")
    _print_summary(harness.aggregate(records), args.json)
    return EXIT_OK


def cmd_plot(args) -> int:
    rows = harness.read_summary(args.summary)
    if not rows:
        raise UsageError(f"{args.summary}: no rows")
    written = plotting.write_plots(rows, args.out)
    for p in written:
        print(p)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _delta(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1), got {text}")
    return v


def _seed(text: str) -> int:
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _kappa(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"concentration must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grouped-bai",
        description="Feasibility-constrained best-arm identification in grouped bandits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file", description="Check an instance file.")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="ground truth, H_id and lower bound",
                       description="Report feasible set, best arm, gaps, H_id and the lower bound.")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--delta", type=_delta, default=0.1, help="confidence parameter (default 0.1)")
    p.add_argument("--kappa", type=_kappa, help="override the beta concentration")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="run one policy on an instance",
                       description="Run a policy on an instance. With --reps 1 the run uses --seed "
                                   "directly; otherwise replication r uses the seed a custom sweep with "
                                   "base seed --seed would derive.")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--policy", choices=POLICY_NAMES, default="css-lucb")
    p.add_argument("--delta", type=_delta, default=0.1, help="confidence parameter (default 0.1)")
    p.add_argument("--seed", type=_seed, default=0, help="64-bit seed, decimal or 0x-hex (default 0)")
    p.add_argument("--reps", type=_positive_int, default=1, help="number of replications (default 1)")
    p.add_argument("--budget-cap", type=_positive_int, default=DEFAULT_BUDGET_CAP, help="maximum pulls per run")
    p.add_argument("--kappa", type=_kappa, help="override the beta concentration")
    p.add_argument("--trace", help="write the per-round trace (JSON lines) to this file")
    p.add_argument("--out", help="directory for records.csv and summary files")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run an experiment config",
                       description="Run every cell of an experiment config and write records.csv, "
                                   "summary.csv and summary.json.")
    p.add_argument("config", help="experiment config JSON file")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--reps", type=_positive_int, help="override replications")
    p.add_argument("--seed", type=_seed, help="override the base seed")
    p.add_argument("--delta", type=_delta, help="override delta")
    p.add_argument("--policy", action="append", choices=POLICY_NAMES, help="restrict to a policy (repeatable)")
    p.add_argument("--budget-cap", type=_positive_int, help="override the pull budget")
    p.add_argument("--kappa", type=_kappa, help="override the beta concentration")
    p.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize records or a trace",
                       description="Aggregate a records.csv, or summarize the diagnostics of a trace file.")
    p.add_argument("path", help="records.csv or trace .jsonl file")
    p.add_argument("--instance", help="instance file (required for trace reports)")
    p.add_argument("--delta", type=_delta, help="delta for trace diagnostics (default: the trace's)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="SVG charts from a summary",
                       description="Write one SVG chart and one CSV of plotted points per experiment.")
    p.add_argument("summary", help="summary.csv from a sweep")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceError as exc:
        print(f"error: invalid instance: {exc}", file=sys.stderr)
    except (ConfigError, UsageError, DegenerateInstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
