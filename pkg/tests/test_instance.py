import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grouped_bai.catalog import catalog, default_sweep
from grouped_bai.instance import (
    BERNOULLI,
    BETA,
    DegenerateInstanceError,
    InstanceError,
    ProblemInstance,
    analyze,
    ground_truth_dict,
    hardness_index,
    load_instance,
    lower_bound,
    save_instance,
)
from oracles import GRID, brute_force, grid_means


def test_toy_ground_truth(toy):
    gt = analyze(toy)
    assert gt.feasible == {0, 2}
    assert gt.best_arm == 0
    assert gt.risky == {1}
    assert gt.suboptimal == {2}
    np.testing.assert_allclose(gt.arm_means, [0.5, 0.6, 0.4])
    assert gt.feasibility_flag
    assert gt.separator == pytest.approx(0.45)


def test_all_zero_instance_is_infeasible():
    gt = analyze(ProblemInstance(np.zeros((3, 2)), 0.5))
    assert gt.feasible == frozenset()
    assert not gt.feasibility_flag
    assert gt.best_arm is None
    assert gt.suboptimal == frozenset()
    assert gt.risky == {0, 1, 2}
    assert gt.separator == -math.inf


def test_exp3_risky_arm():
    gt = analyze(catalog("exp3", 0.2))
    assert gt.feasible == {0, 1}
    assert gt.best_arm == 0
    assert 2 in gt.risky


def test_toy_hardness(toy):
    assert hardness_index(analyze(toy)) == pytest.approx(900.0)


def test_hardness_two_single_attribute_arms():
    # Arm 2 has the lower mean, so it is sub-optimal rather than risky; both
    # readings give the same two terms of 1 / 0.4^2.
    gt = analyze(ProblemInstance(np.array([[0.9], [0.1]]), 0.5))
    assert gt.feasible == {0}
    assert gt.suboptimal == {1}
    assert hardness_index(gt) == pytest.approx(12.5)


def test_hardness_without_suboptimal_arm():
    gt = analyze(ProblemInstance(np.array([[0.6, 0.6], [1.0, 0.3]]), 0.5))
    assert gt.suboptimal == frozenset()
    assert gt.risky == {1}
    assert gt.gaps[0] == math.inf
    assert gt.separator == -math.inf
    assert hardness_index(gt) == pytest.approx(1 / 0.1**2 + 1 / 0.2**2)


def test_exp1_hardness_decreases_along_sweep():
    h = [analyze(catalog("exp1", x)).hardness for x in default_sweep("exp1")]
    assert all(a > b for a, b in zip(h, h[1:]))


def test_degenerate_hardness():
    gt = analyze(ProblemInstance(np.array([[0.5, 0.3]]), 0.3))
    assert gt.hardness == math.inf
    with pytest.raises(DegenerateInstanceError):
        hardness_index(gt)
    with pytest.raises(DegenerateInstanceError):
        lower_bound(ProblemInstance(np.array([[0.5, 0.3]]), 0.3), gt, 0.1)


@pytest.mark.parametrize(
    "means, threshold, row, col",
    [
        ([[0.5, 1.2]], 0.3, 1, 2),
        ([[0.5, 0.4], [-0.1, 0.4]], 0.3, 2, 1),
        ([[0.5, float("nan")]], 0.3, 1, 2),
    ],
)
def test_out_of_range_means_report_position(means, threshold, row, col):
    with pytest.raises(InstanceError) as err:
        ProblemInstance(np.array(means), threshold)
    assert (err.value.row, err.value.col) == (row, col)


def test_tied_best_arm_rejected():
    with pytest.raises(InstanceError, match="not unique"):
        ProblemInstance(np.array([[0.5, 0.5], [0.6, 0.4], [0.1, 0.1]]), 0.3)


def test_tie_among_infeasible_arms_is_fine():
    ProblemInstance(np.array([[0.5, 0.5], [0.9, 0.1], [0.1, 0.9]]), 0.3)


@pytest.mark.parametrize(
    "doc, message, row, col",
    [
        ({"threshold": 0.3, "means": [[0.5, 0.5], [0.4]]}, "ragged", 2, None),
        ({"threshold": 0.3, "means": [[0.5, "a"]]}, "non-numeric", 1, 2),
        ({"threshold": 0.3, "means": [[0.5, True]]}, "non-numeric", 1, 2),
        ({"threshold": 0.3, "means": []}, "non-empty", None, None),
        ({"means": [[0.5]]}, "threshold", None, None),
        ({"threshold": 0.3, "means": [[0.5]], "colour": 1}, "unknown", None, None),
        ({"threshold": 0.3, "means": [[0.5]], "reward_family": "gauss"}, "family", None, None),
        ({"threshold": 0.3, "means": [[0.5]], "concentration": 0}, "concentration", None, None),
    ],
)
def test_from_dict_rejects(doc, message, row, col):
    with pytest.raises(InstanceError, match=message) as err:
        ProblemInstance.from_dict(doc)
    assert (err.value.row, err.value.col) == (row, col)


def test_instance_file_roundtrip(tmp_path):
    inst = ProblemInstance(np.array([[0.6, 0.4], [0.2, 1.0]]), 0.3, BETA, 3.5)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.reward_family == BETA and back.kappa == 3.5
    np.testing.assert_array_equal(back.means, inst.means)
    assert json.loads(path.read_text())["concentration"] == 3.5


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InstanceError, match="JSON"):
        load_instance(path)


def test_ground_truth_dict_is_one_based_and_json_safe(toy):
    doc = ground_truth_dict(analyze(toy))
    assert doc["feasible"] == [1, 3] and doc["best_arm"] == 1 and doc["risky"] == [2]
    assert doc["gaps"][1] is None
    assert json.loads(json.dumps(doc)) == doc


# -- lower bound ----------------------------------------------------------------


def test_toy_lower_bound(toy):
    rep = lower_bound(toy, analyze(toy), 0.1)
    assert rep.c1 == pytest.approx(0.7)
    assert rep.c2 == pytest.approx(0.03125)
    # No infeasible sub-optimal arm, so the third class is empty.
    assert rep.c3 is None
    assert rep.constant == pytest.approx(0.03125)
    assert rep.samples == pytest.approx(math.log(1 / 0.24) * 0.03125 * 900)
    assert not rep.heuristic and not rep.vacuous


def test_lower_bound_third_constant_when_class_present():
    inst = ProblemInstance(np.array([[0.6, 0.4], [0.2, 0.3], [0.4, 0.4]]), 0.3, BERNOULLI)
    gt = analyze(inst)
    assert 1 in gt.infeasible & gt.suboptimal
    rep = lower_bound(inst, gt, 0.1)
    assert rep.c3 == pytest.approx(0.5 / 8)


def test_lower_bound_zero_at_delta_one_over_2_4(toy):
    rep = lower_bound(toy, analyze(toy), 1 / 2.4)
    assert rep.samples == pytest.approx(0.0, abs=1e-12)


def test_lower_bound_single_feasible_arm_uses_second_constant_only():
    inst = ProblemInstance(np.array([[0.7, 0.6]]), 0.3, BERNOULLI)
    rep = lower_bound(inst, analyze(inst), 0.1)
    assert rep.c1 is None and rep.c3 is None
    assert rep.constant == rep.c2


def test_lower_bound_vacuous_when_best_mean_is_one():
    inst = ProblemInstance(np.array([[1.0, 1.0], [0.2, 0.9]]), 0.3, BERNOULLI)
    rep = lower_bound(inst, analyze(inst), 0.1)
    assert rep.constant == 0.0 and rep.samples == 0.0 and rep.vacuous


def test_lower_bound_flags_non_bernoulli(toy):
    beta = ProblemInstance(toy.means, 0.3, BETA)
    assert lower_bound(beta, analyze(beta), 0.1).heuristic


def test_lower_bound_samples_grow_with_hardness_on_exp3_sweep():
    # Along this sweep x only moves a risky arm's blocking attribute, so the
    # constants stay fixed while H_id grows.
    reps = []
    for x in default_sweep("exp3"):
        inst = catalog("exp3", x, reward_family=BERNOULLI)
        gt = analyze(inst)
        reps.append((gt.hardness, lower_bound(inst, gt, 0.1)))
    consts = {(r.c1, r.c2, r.c3) for _, r in reps}
    assert len(consts) == 1
    reps.sort(key=lambda p: p[0])
    samples = [r.samples for _, r in reps]
    assert samples == sorted(samples)


# -- oracle agreement -------------------------------------------------------------


grid_instance = st.integers(1, 6).flatmap(
    lambda n: st.integers(1, 4).flatmap(
        lambda m: st.tuples(
            st.lists(st.lists(st.integers(0, GRID), min_size=m, max_size=m), min_size=n, max_size=n),
            st.integers(0, GRID),
        )
    )
)


def check_against_oracle(ks, tk):
    means = grid_means(ks)
    th = Fraction(tk, GRID)
    ref = brute_force(means, th)
    arr = np.array(ks, dtype=float) / GRID
    if ref.tie:
        with pytest.raises(InstanceError):
            ProblemInstance(arr, tk / GRID)
        return
    gt = analyze(ProblemInstance(arr, tk / GRID))
    assert gt.feasible == ref.feasible
    assert gt.best_arm == ref.best
    assert gt.second_best == ref.second
    assert gt.suboptimal == ref.suboptimal
    assert gt.risky == ref.risky
    np.testing.assert_allclose(gt.arm_means, [float(a) for a in ref.arm_means], rtol=0, atol=1e-12)
    if ref.separator is None:
        assert gt.separator == -math.inf
    else:
        assert gt.separator == pytest.approx(float(ref.separator), abs=1e-12)
    if ref.hardness is None:
        assert gt.hardness == math.inf
    else:
        assert gt.hardness == pytest.approx(float(ref.hardness), rel=1e-9)


@given(grid_instance)
def test_analyze_matches_brute_force(inst):
    check_against_oracle(*inst)


@given(grid_instance, st.randoms(use_true_random=False))
def test_hardness_invariant_under_permutations(inst, rnd):
    ks, tk = inst
    ref = brute_force(grid_means(ks), Fraction(tk, GRID))
    if ref.tie or ref.hardness is None:
        return
    arr = np.array(ks, dtype=float) / GRID
    rows = list(range(arr.shape[0]))
    rnd.shuffle(rows)
    permuted = arr[rows]
    for i in range(permuted.shape[0]):
        cols = list(range(arr.shape[1]))
        rnd.shuffle(cols)
        permuted[i] = permuted[i][cols]
    h0 = analyze(ProblemInstance(arr, tk / GRID)).hardness
    h1 = analyze(ProblemInstance(permuted, tk / GRID)).hardness
    assert h1 == pytest.approx(h0, rel=1e-12)


@given(grid_instance)
def test_adding_a_high_attribute(inst):
    ks, tk = inst
    means = grid_means(ks)
    th = Fraction(tk, GRID)
    ref = brute_force(means, th)
    if ref.tie:
        return
    max_gap = max(abs(v - th) for row in means for v in row)
    extra_k = min(GRID, int(math.ceil((th + max_gap) * GRID)))
    if Fraction(extra_k, GRID) < th + max_gap:
        return
    wider = [row + [extra_k] for row in ks]
    ref2 = brute_force(grid_means(wider), th)
    if ref2.tie:
        return
    before = analyze(ProblemInstance(np.array(ks, dtype=float) / GRID, tk / GRID))
    after = analyze(ProblemInstance(np.array(wider, dtype=float) / GRID, tk / GRID))
    assert after.feasible == before.feasible
    assert np.all(after.arm_attr_gaps >= before.arm_attr_gaps - 1e-12)
    if ref2.hardness is None:
        assert after.hardness == math.inf
    else:
        assert after.hardness == pytest.approx(float(ref2.hardness), rel=1e-9)
