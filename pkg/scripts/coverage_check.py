"""Monte-Carlo check of the confidence event and the sufficient stopping condition.

Runs traced CSS-LUCB replications on one catalog instance and reports the
fraction of runs in which every confidence interval held at every round, with
a 99% exact binomial interval, plus per-round coverage cells and condition
failures.

Usage: python3 scripts/coverage_check.py --experiment exp1 --x 0.33 --runs 500
"""

import argparse

from grouped_bai import css_lucb
from grouped_bai.catalog import catalog
from grouped_bai.diagnostics import analyze_trace, coverage_calibration, run_fraction
from grouped_bai.env import Environment
from grouped_bai.harness import derive_seed
from grouped_bai.instance import analyze


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--experiment", default="exp1")
    parser.add_argument("--x", type=float, default=0.33, help="sweep value")
    parser.add_argument("--runs", type=int, default=500)
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    args = parser.parse_args()

    inst = catalog(args.experiment, args.x)
    gt = analyze(inst)
    diags = []
    for r in range(args.runs):
        env = Environment(inst, derive_seed(args.seed, args.experiment, args.x, css_lucb.POLICY, r))
        res = css_lucb.run(env, inst.threshold, args.delta, record_trace=True)
        diags.append(analyze_trace(res.trace, gt))

    frac, lo, hi = run_fraction([d.E_throughout for d in diags])
    target = 1 - args.delta / 4
    print(f"E held throughout in {frac:.4f} of {args.runs} runs, 99% CI [{lo:.4f}, {hi:.4f}], target {target}")
    report = coverage_calibration(diags, inst.n_arms, inst.n_attrs, args.delta)
    print(f"coverage cells with a violation: {len(report.cells)}, above delta/(2NMt^3): {len(report.failures)}")
    for c in report.failures[:10]:
        print(f"  t={c.round} pair=({c.arm + 1},{c.attr + 1}) {c.violations}/{c.runs} bound={c.bound:.2e}")
    failures = sum(len(d.condition_failures()) for d in diags)
    print(f"rounds where E held but neither pulled arm met the stopping condition: {failures}")
    print(f"partition complete on every round: {all(d.partition_ok() for d in diags)}")


if __name__ == "__main__":
    main()
