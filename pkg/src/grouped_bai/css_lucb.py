"""Confidence Set Sampling (CSS-LUCB).

Two engines produce identical results for the same environment seed:

* ``"reference"`` steps through :func:`update_statistics`,
  :func:`classify_sets`, :func:`check_stop` and :func:`select_pulls` on an
  :class:`AlgorithmState`, one round at a time.
* ``"fast"`` runs the same rule in a compiled loop and is what the
  experiment harness uses.

Every selected arm has all of its attributes pulled, so ``T_ij = T_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import _kernels as K
from .env import Environment
from .results import DEFAULT_BUDGET_CAP, RunResult, Trace, drive

POLICY = "css-lucb"


def confidence_radius(t: int, pulls: int, delta: float, n_arms: int, n_attrs: int) -> float:
    """sqrt(ln(4 N M t^4 / delta) / (2 T)) for round ``t`` and ``pulls`` samples."""
    return K.radius(K.log_term(t, n_arms, n_attrs, delta), pulls)


@dataclass
class AlgorithmState:
    n_arms: int
    n_attrs: int
    threshold: float
    delta: float
    round: int = 1
    total_pulls: int = 0
    pulls: np.ndarray = None
    sums: np.ndarray = None
    emp_attr_means: np.ndarray = None
    emp_arm_means: np.ndarray = None
    attr_lower: np.ndarray = None
    attr_upper: np.ndarray = None
    arm_lower: np.ndarray = None
    arm_upper: np.ndarray = None
    # Boolean masks over pairs (N x M) or arms (N).
    perfectly_feasible_attr: np.ndarray = None
    almost_feasible_attr: np.ndarray = None
    feasible_attr: np.ndarray = None
    perfectly_feasible: np.ndarray = None
    almost_feasible: np.ndarray = None
    feasible: np.ndarray = None
    potential: np.ndarray = None
    candidate: Optional[int] = None
    star_candidate: Optional[int] = None
    competitor: Optional[int] = None
    last_pulled: list = field(default_factory=list)

    def __post_init__(self):
        shape = (self.n_arms, self.n_attrs)
        if self.pulls is None:
            self.pulls = np.zeros(shape, dtype=np.int64)
        if self.sums is None:
            self.sums = np.zeros(shape)

    @property
    def arm_pulls(self) -> np.ndarray:
        return self.pulls.min(axis=1)

    @classmethod
    def from_means(cls, means, threshold: float, delta: float = 0.1) -> "AlgorithmState":
        """A classified state whose estimates equal ``means`` with zero-width bounds."""
        means = np.asarray(means, dtype=float)
        n, m = means.shape
        st = cls(n, m, threshold, delta, round=2, total_pulls=n * m)
        st.pulls = np.ones((n, m), dtype=np.int64)
        st.sums = means.copy()
        st.emp_attr_means = means.copy()
        st.emp_arm_means = _row_means(means)
        st.attr_lower = st.attr_upper = means.copy()
        st.arm_lower = st.arm_upper = st.emp_arm_means.copy()
        return classify_sets(st, threshold)

    def arms(self, mask) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(mask))


def _row_means(x: np.ndarray) -> np.ndarray:
    # Sequential sum over attributes, matching the compiled loops.
    total = x[:, 0].copy()
    for j in range(1, x.shape[1]):
        total += x[:, j]
    return total / x.shape[1]


def _argmax(values: np.ndarray, mask: np.ndarray) -> Optional[int]:
    """Lowest index among the maxima of ``values`` over ``mask``."""
    best = None
    for i in np.flatnonzero(mask):
        if best is None or values[i] > values[best]:
            best = int(i)
    return best


def recompute_bounds(state: AlgorithmState) -> AlgorithmState:
    n, m = state.n_arms, state.n_attrs
    lg = K.log_term(state.round, n, m, state.delta)
    attr_rad = np.array([[K.radius(lg, T) for T in row] for row in state.pulls])
    arm_rad = np.array([K.radius(lg, T) for T in state.arm_pulls])
    state.emp_attr_means = state.sums / state.pulls
    state.emp_arm_means = _row_means(state.emp_attr_means)
    state.attr_lower = state.emp_attr_means - attr_rad
    state.attr_upper = state.emp_attr_means + attr_rad
    state.arm_lower = state.emp_arm_means - arm_rad
    state.arm_upper = state.emp_arm_means + arm_rad
    return state


def update_statistics(state: AlgorithmState, rewards: Iterable[tuple[int, int, float]]) -> AlgorithmState:
    """Fold one round of rewards into the state and move to the next round.

    Bounds are recomputed for the new round index, so after the first round
    they are evaluated at t = 2.
    """
    pulled = []
    for arm, attr, value in rewards:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"reward {value!r} for pair ({arm}, {attr}) outside [0, 1]")
        state.pulls[arm, attr] += 1
        state.sums[arm, attr] += value
        state.total_pulls += 1
        pulled.append((arm, attr))
    state.last_pulled = pulled
    state.round += 1
    return recompute_bounds(state)


def classify_sets(state: AlgorithmState, threshold: float) -> AlgorithmState:
    lo, hi = state.attr_lower, state.attr_upper
    state.perfectly_feasible_attr = lo >= threshold
    state.almost_feasible_attr = (lo < threshold) & (threshold <= hi)
    state.feasible_attr = state.perfectly_feasible_attr | state.almost_feasible_attr
    state.perfectly_feasible = state.perfectly_feasible_attr.all(axis=1)
    state.feasible = state.feasible_attr.all(axis=1)
    state.almost_feasible = state.feasible & ~state.perfectly_feasible
    state.star_candidate = _argmax(state.emp_arm_means, state.perfectly_feasible)
    if state.star_candidate is None:
        state.potential = np.ones(state.n_arms, dtype=bool)
    else:
        s = state.star_candidate
        state.potential = state.arm_upper >= state.arm_lower[s]
        state.potential[s] = False
    state.candidate = _argmax(state.emp_arm_means, state.feasible)
    return state


def _result(state: AlgorithmState, f_hat: bool, arm: Optional[int], budget: bool = False,
            trace: Optional[Trace] = None) -> RunResult:
    return RunResult(
        policy=POLICY,
        feasibility_flag_hat=f_hat,
        output_arm=arm,
        total_pulls=state.total_pulls,
        rounds=state.round - 1,
        pulls_matrix=state.pulls.copy(),
        stopped_by_budget=budget,
        trace=trace,
    )


def check_stop(state: AlgorithmState) -> Optional[RunResult]:
    """Stop once no feasible arm other than the confirmed leader is in contention."""
    if not state.feasible.any():
        return _result(state, False, None)
    if state.star_candidate is not None and not (state.feasible & state.potential).any():
        return _result(state, True, state.star_candidate)
    return None


def select_pulls(state: AlgorithmState) -> list[tuple[int, int]]:
    """All attributes of the empirical leader and of its strongest rival."""
    if not state.feasible.any():
        raise RuntimeError("select_pulls called with an empty feasible set; the run should have stopped")
    lead = _argmax(state.emp_arm_means, state.feasible)
    rival = None
    if state.feasible.sum() > 1:
        others = state.feasible.copy()
        others[lead] = False
        rival = _argmax(state.arm_upper, others)
    state.candidate, state.competitor = lead, rival
    arms = [lead] if rival is None else [lead, rival]
    return [(a, j) for a in arms for j in range(state.n_attrs)]


def _run_reference(env: Environment, threshold: float, delta: float, budget_cap: int) -> RunResult:
    n, m = env.n_arms, env.n_attrs
    state = AlgorithmState(n, m, threshold, delta)
    first = [(i, j, env.sample(i, j)) for i in range(n) for j in range(m)]
    update_statistics(state, first)
    while True:
        classify_sets(state, threshold)
        done = check_stop(state)
        if done is not None:
            return done
        pairs = select_pulls(state)
        if state.total_pulls + len(pairs) > budget_cap:
            guess = state.star_candidate if state.star_candidate is not None else state.candidate
            return _result(state, True, guess, budget=True)
        update_statistics(state, [(i, j, env.sample(i, j)) for i, j in pairs])


def run(env: Environment, threshold: float, delta: float, *,
        budget_cap: int = DEFAULT_BUDGET_CAP, engine: str = "fast",
        record_trace: bool = False) -> RunResult:
    """Run CSS-LUCB against ``env`` until it stops or exhausts ``budget_cap`` pulls."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if budget_cap < env.n_arms * env.n_attrs:
        raise ValueError(f"budget_cap {budget_cap} is below the {env.n_arms * env.n_attrs} pulls of the first round")
    if engine == "reference":
        if record_trace:
            raise ValueError("traces are recorded by the fast engine only")
        return _run_reference(env, threshold, delta, budget_cap)
    if engine != "fast":
        raise ValueError(f"unknown engine {engine!r}")
    return drive(POLICY, K.css_lucb_loop, env, threshold, delta, budget_cap,
                 record_trace=record_trace)

