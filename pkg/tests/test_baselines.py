import numpy as np
import pytest

from grouped_bai import baselines, css_lucb
from grouped_bai.baselines import run_feasibility_then_bai, run_grouped_elimination
from grouped_bai.catalog import catalog
from grouped_bai.css_lucb import confidence_radius
from grouped_bai.env import Environment
from grouped_bai.instance import BERNOULLI, InstanceError, ProblemInstance, analyze
from grouped_bai.results import RunResult

from conftest import TOY

RUNNERS = [run_grouped_elimination, run_feasibility_then_bai]


@pytest.mark.parametrize("runner", RUNNERS)
def test_single_arm_far_above_threshold(runner):
    inst = ProblemInstance(np.array([[0.9, 0.95]]), 0.1, BERNOULLI)
    for seed in range(20):
        res = runner(Environment(inst, seed), 0.1, 0.1)
        assert (res.feasibility_flag_hat, res.output_arm) == (True, 0)


@pytest.mark.parametrize("runner", RUNNERS)
def test_all_arms_far_below_threshold(runner):
    inst = ProblemInstance(np.full((3, 2), 0.1), 0.9, BERNOULLI)
    hits = sum(not runner(Environment(inst, s), 0.9, 0.1).feasibility_flag_hat for s in range(200))
    assert hits >= 180


def test_wide_margins_both_baselines_agree():
    inst = ProblemInstance(np.array([[0.9, 0.95], [0.6, 0.7], [0.5, 0.55]]), 0.1, BERNOULLI)
    for seed in range(20):
        ge = run_grouped_elimination(Environment(inst, seed), 0.1, 0.1)
        ftb = run_feasibility_then_bai(Environment(inst, seed), 0.1, 0.1, record_trace=True)
        assert ge.output_arm == ftb.output_arm == 0
        # Classification is quick next to separating the arm means.
        phases = ftb.trace.sizes[:, 1]
        assert (phases == 1).sum() < (phases == 2).sum()


def test_toy_feasibility_then_bai(toy):
    gt = analyze(toy)
    correct = sum(run_feasibility_then_bai(Environment(toy, s), 0.3, 0.1).is_correct(gt) for s in range(200))
    assert correct >= 180


def _phase_one_pulls(res: RunResult, m: int) -> int:
    tr = res.trace
    rows = tr.sizes[:, 1] == 1
    return int(tr.sizes[rows, 0].sum()) * m


def test_phase_one_cost_grows_as_risky_attribute_nears_threshold():
    costs = {}
    for x in (0.05, 0.3):
        inst = catalog("exp3", x)
        costs[x] = np.mean([
            _phase_one_pulls(run_feasibility_then_bai(Environment(inst, s), inst.threshold, 0.1,
                                                      record_trace=True), inst.n_attrs)
            for s in range(20)
        ])
    assert costs[0.3] > costs[0.05]


@pytest.mark.parametrize("runner", RUNNERS)
def test_budget_cap_is_reported(toy, runner):
    res = runner(Environment(toy, 0), 0.3, 0.1, budget_cap=500)
    assert res.stopped_by_budget and res.total_pulls <= 500


@pytest.mark.parametrize("runner", RUNNERS)
def test_configuration_errors(toy, runner):
    with pytest.raises(ValueError):
        runner(Environment(toy, 0), 0.3, 0.1, budget_cap=3)
    with pytest.raises(ValueError):
        runner(Environment(toy, 0), 0.3, 1.5)


# -- permanent elimination and shared radius --------------------------------------------


def _trace(runner, exp, x, seed):
    inst = catalog(exp, x)
    env = Environment(inst, seed)
    return inst, env, runner(env, inst.threshold, 0.1, record_trace=True)


@pytest.mark.parametrize("exp, x", [("exp1", 0.35), ("exp2", 0.5), ("exp3", 0.05)])
def test_grouped_elimination_is_permanent(exp, x):
    for seed in range(3):
        inst, env, res = _trace(run_grouped_elimination, exp, x, seed)
        mask = res.trace.mask.astype(bool)
        assert not (mask[1:] & ~mask[:-1]).any()
        assert (env.consumed == env.consumed[:, :1]).all()


@pytest.mark.parametrize("exp, x", [("exp1", 0.35), ("exp2", 0.5), ("exp3", 0.05)])
def test_feasibility_then_bai_eliminations_are_permanent(exp, x):
    for seed in range(3):
        inst, env, res = _trace(run_feasibility_then_bai, exp, x, seed)
        tr = res.trace
        phase = tr.sizes[:, 1]
        assert (np.diff(phase) >= 0).all()
        for p in (1, 2):
            mask = tr.mask[phase == p].astype(bool)
            assert not (mask[1:] & ~mask[:-1]).any()
        # Arms in play in phase 2 were all still in play in phase 1.
        if (phase == 1).any() and (phase == 2).any():
            first = tr.mask[phase == 1][0].astype(bool)
            assert not (tr.mask[phase == 2].astype(bool) & ~first).any()


def _replay_grouped_elimination(tr, threshold, delta):
    """Active sets re-derived from trace statistics and the shared radius."""
    n, m = tr.n_arms, tr.n_attrs
    active = np.ones(n, dtype=bool)
    out = []
    for r in range(len(tr)):
        t = int(tr.round[r])
        rad = np.array([confidence_radius(t, int(c), delta, n, m) for c in tr.counts[r]])
        emp = tr.sums[r] / tr.counts[r][:, None]
        mean = emp.sum(axis=1) / m
        infeasible = ((emp + rad[:, None]) < threshold).any(axis=1)
        confirmed = ((emp - rad[:, None]) >= threshold).all(axis=1)
        active = active & ~infeasible
        pool = active & confirmed
        if pool.any():
            best_lo = (mean - rad)[pool].max()
            active = active & ~(mean + rad < best_lo - 1e-12)
        out.append(active.copy())
    return np.array(out)


def test_grouped_elimination_uses_the_shared_radius():
    inst, env, res = _trace(run_grouped_elimination, "exp1", 0.35, 4)
    np.testing.assert_array_equal(_replay_grouped_elimination(res.trace, inst.threshold, 0.1),
                                  res.trace.mask.astype(bool))


def test_radius_is_one_implementation():
    # All three loops call the same compiled radius; check it against the public wrapper.
    from grouped_bai import _kernels as K

    for t, T in [(2, 1), (26, 1), (1000, 37)]:
        assert K.radius(K.log_term(t, 5, 5, 0.1), T) == confidence_radius(t, T, 0.1, 5, 5)
        assert K.radius(K.log_term(t, 5, 5, 0.05), T) == confidence_radius(t, T, 0.05, 5, 5)


@pytest.mark.slow
@pytest.mark.parametrize("runner", RUNNERS)
def test_baselines_pac_on_random_instances(runner):
    """Error rate at most delta over 200 runs on each of a few random Bernoulli instances."""
    rng = np.random.default_rng(1234)
    checked = 0
    while checked < 4:
        n, m = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        means = rng.integers(0, 21, size=(n, m)) / 20
        th = int(rng.integers(4, 17)) / 20
        try:
            inst = ProblemInstance(means, th, BERNOULLI)
        except InstanceError:
            continue
        gt = analyze(inst)
        if not np.isfinite(gt.hardness) or gt.hardness > 400:
            continue
        errors = sum(not runner(Environment(inst, 50_000 + s), th, 0.1).is_correct(gt) for s in range(200))
        assert errors <= 20, (means.tolist(), th, errors)
        checked += 1
