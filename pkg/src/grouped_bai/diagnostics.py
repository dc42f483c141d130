"""Analysis-only constructs evaluated against ground truth.

These consume :class:`AlgorithmState` objects or recorded traces; the policy
code carries no test-only branches. Bounds rebuilt from a trace use the same
arithmetic order as the compiled loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from .css_lucb import POLICY, AlgorithmState
from .instance import GroundTruth
from .results import Trace

TERMINATION_CONSTANT = 159


@dataclass(frozen=True)
class DiagnosticSnapshot:
    """Empirical partition and sufficient-condition check at one round.

    ``termination_condition_violated`` is true when i_t or c_t lies in
    (∂F_t minus S_t) ∪ (F_t ∩ N_t), i.e. when the sufficient condition for
    stopping does not yet hold.
    """

    round: int
    event_E_holds: bool
    emp_suboptimal: frozenset
    emp_risky: frozenset
    emp_neutral: frozenset
    termination_condition_violated: bool


def _radii(t, pulls, delta, n, m) -> np.ndarray:
    lg = K.log_term(int(t), n, m, delta)
    return np.sqrt(lg / (2.0 * np.asarray(pulls, dtype=float)))


def event_E(state: AlgorithmState, gt: GroundTruth) -> bool:
    """Whether every attribute and arm estimate lies within its radius."""
    n, m = state.n_arms, state.n_attrs
    attr_rad = _radii(state.round, state.pulls, state.delta, n, m)
    arm_rad = _radii(state.round, state.arm_pulls, state.delta, n, m)
    ok_attr = np.abs(state.emp_attr_means - gt.means) <= attr_rad
    ok_arm = np.abs(state.emp_arm_means - gt.arm_means) <= arm_rad
    return bool(ok_attr.all() and ok_arm.all())


def _partition_masks(lower, upper, separator):
    s = upper < separator
    r = lower > separator
    return s, r, ~(s | r)


def empirical_partition(state: AlgorithmState, gt: GroundTruth) -> tuple[frozenset, frozenset, frozenset]:
    """(S_t, R_t, N_t) relative to the separator of the true means."""
    s, r, nn = _partition_masks(state.arm_lower, state.arm_upper, gt.separator)
    return state.arms(s), state.arms(r), state.arms(nn)


def _condition_set(feasible, perfect, s, nn):
    return (feasible & ~perfect & ~s) | (feasible & nn)


def snapshot(state: AlgorithmState, gt: GroundTruth) -> DiagnosticSnapshot:
    """Diagnostics for a state that has been classified and had pulls selected."""
    s, r, nn = _partition_masks(state.arm_lower, state.arm_upper, gt.separator)
    in_set = _condition_set(state.feasible, state.perfectly_feasible, s, nn)
    chosen = [a for a in (state.candidate, state.competitor) if a is not None]
    return DiagnosticSnapshot(
        round=state.round,
        event_E_holds=event_E(state, gt),
        emp_suboptimal=state.arms(s),
        emp_risky=state.arms(r),
        emp_neutral=state.arms(nn),
        termination_condition_violated=any(bool(in_set[a]) for a in chosen),
    )


@dataclass(frozen=True)
class PullThresholds:
    """Per-arm u_i(t) and v_i(t); arms with a zero or undefined gap are excluded."""

    round: int
    u: dict
    v: dict
    excluded_u: frozenset
    excluded_v: frozenset


def _ceil_ratio(lg: float, gap: float) -> int:
    return int(math.ceil(lg / (2.0 * gap * gap)))


def pull_thresholds(gt: GroundTruth, delta: float, n_arms: int, n_attrs: int, t: int) -> PullThresholds:
    """Smallest pull counts after which an arm's interval clears its gap at round ``t``.

    ``u`` uses the arm's mean gap (defined for the best and sub-optimal arms)
    and ``v`` its attribute gap.
    """
    lg = K.log_term(int(t), n_arms, n_attrs, delta)
    u, v = {}, {}
    skip_u, skip_v = set(), set()
    for i in range(gt.n_arms):
        g = gt.gaps[i]
        if np.isnan(g) or g == 0:
            skip_u.add(i)
        else:
            u[i] = _ceil_ratio(lg, g)
        ga = gt.arm_attr_gaps[i]
        if ga == 0:
            skip_v.add(i)
        else:
            v[i] = _ceil_ratio(lg, ga)
    return PullThresholds(int(t), u, v, frozenset(skip_u), frozenset(skip_v))


def termination_budget(gt: GroundTruth, delta: float) -> float:
    """159 H ln(H / delta): pulls after which CSS-LUCB stops with high probability."""
    return budget_for_hardness(gt.hardness, delta)


def budget_for_hardness(h: float, delta: float) -> float:
    if not math.isfinite(h):
        raise ValueError("hardness index is infinite; termination budget undefined")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if h < delta:
        raise ValueError(f"termination budget needs H_id >= delta, got H_id = {h}")
    return TERMINATION_CONSTANT * h * math.log(h / delta)


def is_vacuous(budget: float) -> bool:
    return budget == 0.0


@dataclass
class TraceDiagnostics:
    """Per-round diagnostics for a CSS-LUCB trace, as arrays over trace rows."""

    round: np.ndarray
    pair_ok: np.ndarray  # (R, N, M) |mu_hat_ij - mu_ij| <= alpha
    arm_ok: np.ndarray  # (R, N)
    feasible: np.ndarray  # F_t
    perfect: np.ndarray  # F_Pt
    suboptimal: np.ndarray  # S_t
    risky: np.ndarray  # R_t
    neutral: np.ndarray  # N_t
    condition_violated: np.ndarray  # (R,)
    stop: np.ndarray

    @property
    def event_E(self) -> np.ndarray:
        return self.pair_ok.all(axis=(1, 2)) & self.arm_ok.all(axis=1)

    @property
    def E_throughout(self) -> bool:
        return bool(self.event_E.all())

    def condition_failures(self) -> np.ndarray:
        """Rows before termination where E holds yet neither i_t nor c_t is in the set."""
        return np.flatnonzero(self.event_E & ~self.stop & ~self.condition_violated)

    def partition_ok(self) -> bool:
        total = self.suboptimal.astype(int) + self.risky.astype(int) + self.neutral.astype(int)
        return bool((total == 1).all())

    def snapshot(self, r: int) -> DiagnosticSnapshot:
        def arms(mask):
            return frozenset(int(i) for i in np.flatnonzero(mask))

        return DiagnosticSnapshot(
            round=int(self.round[r]),
            event_E_holds=bool(self.event_E[r]),
            emp_suboptimal=arms(self.suboptimal[r]),
            emp_risky=arms(self.risky[r]),
            emp_neutral=arms(self.neutral[r]),
            termination_condition_violated=bool(self.condition_violated[r]),
        )


def trace_bounds(trace: Trace) -> dict:
    """Empirical means and confidence bounds for every trace row."""
    n, m = trace.n_arms, trace.n_attrs
    tf = trace.round.astype(float)
    t4 = tf * tf * tf * tf
    lg = np.log(4.0 * n * m * t4 / trace.delta)
    rad = np.sqrt(lg[:, None] / (2.0 * trace.counts))
    emp = trace.sums / trace.counts[:, :, None]
    total = emp[:, :, 0].copy()
    for j in range(1, m):
        total += emp[:, :, j]
    arm = total / m
    return {
        "emp_attr": emp,
        "emp_arm": arm,
        "radius": rad,
        "attr_lower": emp - rad[:, :, None],
        "attr_upper": emp + rad[:, :, None],
        "arm_lower": arm - rad,
        "arm_upper": arm + rad,
    }


def analyze_trace(trace: Trace, gt: GroundTruth) -> TraceDiagnostics:
    if trace.policy != POLICY:
        raise ValueError(f"trace diagnostics apply to {POLICY} traces, got {trace.policy!r}")
    if (trace.n_arms, trace.n_attrs) != gt.means.shape:
        raise ValueError("trace and ground truth disagree on instance size")
    b = trace_bounds(trace)
    th = trace.threshold
    pair_ok = np.abs(b["emp_attr"] - gt.means[None]) <= b["radius"][:, :, None]
    arm_ok = np.abs(b["emp_arm"] - gt.arm_means[None]) <= b["radius"]
    feasible = (b["attr_upper"] >= th).all(axis=2)
    perfect = (b["attr_lower"] >= th).all(axis=2)
    s, r, nn = _partition_masks(b["arm_lower"], b["arm_upper"], gt.separator)
    in_set = _condition_set(feasible, perfect, s, nn)
    rows = np.arange(len(trace))
    lead = trace.candidate
    rival = trace.competitor
    hit_lead = (lead >= 0) & in_set[rows, np.maximum(lead, 0)]
    hit_rival = (rival >= 0) & in_set[rows, np.maximum(rival, 0)]
    return TraceDiagnostics(
        round=trace.round,
        pair_ok=pair_ok,
        arm_ok=arm_ok,
        feasible=feasible,
        perfect=perfect,
        suboptimal=s,
        risky=r,
        neutral=nn,
        condition_violated=hit_lead | hit_rival,
        stop=trace.stop,
    )


def binomial_ci(successes: int, trials: int, level: float = 0.99) -> tuple[float, float]:
    """Exact (Clopper-Pearson) interval for a binomial proportion."""
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class CoverageCell:
    round: int
    arm: int
    attr: int
    runs: int
    violations: int
    bound: float
    ci_low: float
    ci_high: float

    @property
    def ok(self) -> bool:
        return self.ci_low <= self.bound


@dataclass(frozen=True)
class CoverageReport:
    """Per-(round, pair) violation frequencies of the attribute confidence events.

    Only cells with at least one violation are listed; a cell with none is
    trivially within its bound.
    """

    runs: int
    rounds_checked: int
    cells: tuple

    @property
    def failures(self) -> list:
        return [c for c in self.cells if not c.ok]


def coverage_calibration(diags: Sequence[TraceDiagnostics], n_arms: int, n_attrs: int,
                         delta: float, level: float = 0.99) -> CoverageReport:
    """Compare per-round violation rates of each E_ij to delta / (2 N M t^3)."""
    max_t = max(int(d.round.max()) for d in diags if len(d.round))
    alive = np.zeros(max_t + 1, dtype=np.int64)
    counts: dict = {}
    for d in diags:
        np.add.at(alive, d.round, 1)
        bad_r, bad_i, bad_j = np.nonzero(~d.pair_ok)
        for r, i, j in zip(bad_r, bad_i, bad_j):
            key = (int(d.round[r]), int(i), int(j))
            counts[key] = counts.get(key, 0) + 1
    cells = []
    for (t, i, j), k in sorted(counts.items()):
        lo, hi = binomial_ci(k, alive[t], level)
        bound = delta / (2.0 * n_arms * n_attrs * t ** 3)
        cells.append(CoverageCell(t, i, j, int(alive[t]), k, bound, lo, hi))
    return CoverageReport(runs=len(diags), rounds_checked=int((alive > 0).sum()), cells=tuple(cells))


def summarize_run(trace: Trace, gt: GroundTruth, delta: Optional[float] = None) -> dict:
    """Diagnostic summary document for one traced CSS-LUCB run (1-based arms)."""
    delta = trace.delta if delta is None else delta
    d = analyze_trace(trace, gt)
    e = d.event_E
    first_fail = None if e.all() else int(d.round[np.argmin(e)])
    total = int(trace.counts[-1].sum()) * trace.n_attrs if len(trace) else 0
    doc = {
        "policy": trace.policy,
        "rounds_traced": len(trace),
        "final_round": int(trace.round[-1]) if len(trace) else None,
        "total_pulls": total,
        "event_E_throughout": bool(e.all()),
        "first_event_E_failure": first_fail,
        "condition_failures": [int(d.round[r]) for r in d.condition_failures()],
        "partition_ok": d.partition_ok(),
        "confirmed_within_feasible": bool((~d.perfect | d.feasible).all()),
    }
    if math.isfinite(gt.hardness) and gt.hardness >= delta:
        budget = termination_budget(gt, delta)
        doc["termination_budget"] = budget
        doc["termination_budget_vacuous"] = is_vacuous(budget)
        doc["within_termination_budget"] = total <= budget
    else:
        doc["termination_budget"] = None
    if len(trace):
        th = pull_thresholds(gt, delta, trace.n_arms, trace.n_attrs, int(trace.round[-1]))
        doc["pull_thresholds"] = {
            "round": th.round,
            "u": {str(i + 1): x for i, x in sorted(th.u.items())},
            "v": {str(i + 1): x for i, x in sorted(th.v.items())},
            "excluded_u": sorted(i + 1 for i in th.excluded_u),
            "excluded_v": sorted(i + 1 for i in th.excluded_v),
        }
    return doc


def run_fraction(flags: Iterable[bool], level: float = 0.99) -> tuple[float, float, float]:
    """Empirical fraction of true flags with its exact binomial interval."""
    flags = list(flags)
    k = sum(bool(f) for f in flags)
    lo, hi = binomial_ci(k, len(flags), level)
    return k / len(flags), lo, hi
