"""Run every benchmark sweep and draw the sample-count figures.

Usage: python3 scripts/run_figures.py --out results [--reps 100] [--workers 4]
"""

import argparse
from pathlib import Path

from grouped_bai.catalog import EXPERIMENTS
from grouped_bai.harness import ExperimentConfig, aggregate, run_experiment, write_records, write_summary
from grouped_bai.plotting import write_plots


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--reps", type=int, default=100, help="replications per cell")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    parser.add_argument("--workers", type=int, default=1, help="worker processes")
    parser.add_argument("--experiments", nargs="+", default=list(EXPERIMENTS), choices=EXPERIMENTS)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for exp in args.experiments:
        cfg = ExperimentConfig(exp, replications=args.reps, base_seed=args.seed)
        records = run_experiment(cfg, workers=args.workers)
        write_records(records, out / f"{exp}_records.csv")
        rows = aggregate(records)
        summary += rows
        for r in rows:
            print(f"{exp:<6} {r.sweep_value!s:>6} {r.policy:<14} H_id={r.hardness:10.1f} "
                  f"pulls={r.mean_pulls:10.0f} +- {r.std_error:7.0f} err={r.error_rate:.3f}")
    write_summary(summary, out / "summary.csv", out / "summary.json")
    for path in write_plots(summary, out / "plots"):
        print(path)


if __name__ == "__main__":
    main()
