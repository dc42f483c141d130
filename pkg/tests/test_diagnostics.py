import json
import math

import numpy as np
import pytest

from grouped_bai import css_lucb
from grouped_bai.catalog import catalog
from grouped_bai.css_lucb import AlgorithmState, classify_sets, confidence_radius, recompute_bounds
from grouped_bai.diagnostics import (
    analyze_trace,
    binomial_ci,
    budget_for_hardness,
    coverage_calibration,
    empirical_partition,
    event_E,
    is_vacuous,
    pull_thresholds,
    run_fraction,
    snapshot,
    summarize_run,
    termination_budget,
    trace_bounds,
)
from grouped_bai.baselines import run_grouped_elimination
from grouped_bai.env import Environment
from grouped_bai.instance import ProblemInstance, analyze


def state_at(means, threshold, pulls, t, delta=0.1):
    """A state whose estimates equal ``means`` after ``pulls`` samples per pair at round ``t``."""
    means = np.asarray(means, dtype=float)
    n, m = means.shape
    st = AlgorithmState(n, m, threshold, delta, round=t, total_pulls=n * m * pulls)
    st.pulls = np.full((n, m), pulls, dtype=np.int64)
    st.sums = means * pulls
    recompute_bounds(st)
    return classify_sets(st, threshold)


# -- event E ----------------------------------------------------------------------


def test_event_E_holds_at_the_true_means(toy):
    gt = analyze(toy)
    assert event_E(state_at(toy.means, 0.3, 50, 40), gt)


def test_event_E_fails_when_one_estimate_is_displaced(toy):
    gt = analyze(toy)
    alpha = confidence_radius(40, 50, 0.1, 3, 2)
    shifted = toy.means.copy()
    shifted[0, 0] += 2 * alpha
    assert not event_E(state_at(shifted, 0.3, 50, 40), gt)


# -- empirical partition ------------------------------------------------------------


def test_partition_without_separator():
    inst = ProblemInstance(np.array([[0.6, 0.6], [1.0, 0.3]]), 0.5)
    gt = analyze(inst)
    assert gt.separator == -math.inf
    s, r, nn = empirical_partition(AlgorithmState.from_means(inst.means, 0.5), gt)
    assert (s, r, nn) == (frozenset(), frozenset({0, 1}), frozenset())


def test_partition_on_toy_oracle(toy):
    gt = analyze(toy)
    s, r, nn = empirical_partition(AlgorithmState.from_means(toy.means, 0.3), gt)
    assert (s, r, nn) == (frozenset({2}), frozenset({0, 1}), frozenset())


def test_partition_with_unit_radius(toy):
    gt = analyze(toy)
    st = AlgorithmState.from_means(toy.means, 0.3)
    st.arm_lower = st.emp_arm_means - 1.0
    st.arm_upper = st.emp_arm_means + 1.0
    assert empirical_partition(st, gt)[2] == frozenset({0, 1, 2})


def test_snapshot_on_oracle_state(toy):
    gt = analyze(toy)
    st = AlgorithmState.from_means(toy.means, 0.3)
    css_lucb.select_pulls(st)
    snap = snapshot(st, gt)
    assert snap.event_E_holds
    assert len(snap.emp_suboptimal | snap.emp_risky | snap.emp_neutral) == 3
    # With zero radii arm 2 is out of F_t, leaving arms 1 and 3.
    assert st.candidate == 0 and st.competitor == 2


# -- pull thresholds --------------------------------------------------------------


def test_pull_threshold_unit_gap():
    # ln(4 N M t^4 / delta) = 2 with N = M = t = 1 and delta = 4 / e^2.
    inst = ProblemInstance(np.array([[1.0], [0.0]]), 0.0)
    gt = analyze(inst)
    assert gt.gaps[1] == pytest.approx(1.0)
    th = pull_thresholds(gt, 4.0 / math.e**2, 1, 1, 1)
    assert th.u[1] == 1


def test_pull_threshold_toy_arm_3(toy):
    gt = analyze(toy)
    th = pull_thresholds(gt, 0.1, 3, 2, 100)
    lg = math.log(4 * 3 * 2 * 100**4 / 0.1)
    assert gt.gaps[2] == pytest.approx(0.1)
    assert th.u[2] == math.ceil(lg / (2 * gt.gaps[2] ** 2))
    assert th.u[2] == 1196


def test_pull_threshold_gap_substitution(toy):
    gt = analyze(toy)
    th = pull_thresholds(gt, 0.1, 3, 2, 100)
    for i in th.u:
        if gt.arm_attr_gaps[i] == gt.gaps[i]:
            assert th.v[i] == th.u[i]
        elif gt.arm_attr_gaps[i] < gt.gaps[i]:
            assert th.v[i] >= th.u[i]


def test_pull_threshold_excludes_zero_gap():
    inst = ProblemInstance(np.array([[0.5, 0.3]]), 0.3)
    th = pull_thresholds(analyze(inst), 0.1, 1, 2, 10)
    assert 0 in th.excluded_v and 0 not in th.v


# -- termination budget -----------------------------------------------------------


def test_termination_budget_toy(toy):
    b = termination_budget(analyze(toy), 0.1)
    assert b == pytest.approx(159 * 900 * math.log(9000))
    assert b == pytest.approx(1.302e6, rel=1e-3)


def test_termination_budget_vacuous_at_ratio_one():
    b = budget_for_hardness(0.1, 0.1)
    assert b == 0.0 and is_vacuous(b)


def test_termination_budget_monotone():
    hs = np.linspace(0.2, 5000, 200)
    bs = [budget_for_hardness(h, 0.1) for h in hs]
    assert all(a < b for a, b in zip(bs, bs[1:]))


def test_termination_budget_rejects_infinite_hardness():
    gt = analyze(ProblemInstance(np.array([[0.5, 0.3]]), 0.3))
    with pytest.raises(ValueError, match="infinite"):
        termination_budget(gt, 0.1)


# -- traces -----------------------------------------------------------------------


def traced(exp, x, seed, delta=0.1):
    inst = catalog(exp, x)
    res = css_lucb.run(Environment(inst, seed), inst.threshold, delta, record_trace=True)
    return inst, analyze(inst), res


def test_trace_bounds_match_public_radius():
    inst, gt, res = traced("exp1", 0.33, 3)
    tr = res.trace
    b = trace_bounds(tr)
    for r in (0, len(tr) // 2, len(tr) - 1):
        for i in range(tr.n_arms):
            assert b["radius"][r, i] == confidence_radius(int(tr.round[r]), int(tr.counts[r, i]), 0.1, 5, 5)


def test_trace_feasible_set_matches_recorded_mask():
    inst, gt, res = traced("exp2", 0.6, 8)
    d = analyze_trace(res.trace, gt)
    np.testing.assert_array_equal(d.feasible, res.trace.mask.astype(bool))
    assert not (d.perfect & ~d.feasible).any()


@pytest.mark.parametrize("exp, x", [("exp1", 0.33), ("exp2", 0.6), ("exp3", 0.2)])
def test_sufficient_condition_and_partition_on_traces(exp, x):
    for seed in range(5):
        inst, gt, res = traced(exp, x, seed)
        d = analyze_trace(res.trace, gt)
        assert d.partition_ok()
        assert len(d.condition_failures()) == 0


def test_analyze_trace_rejects_baseline_traces():
    inst = catalog("exp1", 0.33)
    res = run_grouped_elimination(Environment(inst, 0), inst.threshold, 0.1, record_trace=True)
    with pytest.raises(ValueError, match="css-lucb"):
        analyze_trace(res.trace, analyze(inst))


def test_summarize_run_document():
    inst, gt, res = traced("exp1", 0.33, 1)
    doc = summarize_run(res.trace, gt)
    assert json.loads(json.dumps(doc)) == doc
    assert doc["total_pulls"] <= res.total_pulls
    assert doc["termination_budget"] == pytest.approx(termination_budget(gt, 0.1))
    assert doc["partition_ok"] and doc["confirmed_within_feasible"]
    assert set(doc["pull_thresholds"]["u"]) <= {"1", "2", "3", "4", "5"}


def test_trace_snapshot_agrees_with_arrays():
    inst, gt, res = traced("exp3", 0.2, 2)
    d = analyze_trace(res.trace, gt)
    snap = d.snapshot(0)
    assert snap.round == 2
    assert snap.emp_suboptimal == frozenset(np.flatnonzero(d.suboptimal[0]).tolist())


def test_coverage_report_on_a_few_runs():
    diags = [analyze_trace(traced("exp1", 0.35, s)[2].trace, analyze(catalog("exp1", 0.35))) for s in range(10)]
    rep = coverage_calibration(diags, 5, 5, 0.1)
    assert rep.runs == 10 and rep.rounds_checked > 0
    assert all(c.violations <= c.runs for c in rep.cells)


# -- binomial intervals -----------------------------------------------------------


def test_binomial_ci_known_values():
    lo, hi = binomial_ci(0, 500, 0.99)
    assert lo == 0.0
    assert hi == pytest.approx(1 - (0.005) ** (1 / 500), rel=1e-9)
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi


def test_run_fraction():
    frac, lo, hi = run_fraction([True] * 99 + [False])
    assert frac == 0.99 and lo < 0.99 < hi
