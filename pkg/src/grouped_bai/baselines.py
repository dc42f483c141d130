"""Action-elimination baselines for constrained best-arm identification.

Both policies pull every attribute of every arm still in play each round and
use the same confidence radius as CSS-LUCB (:func:`css_lucb.confidence_radius`
is the single implementation behind all three).
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .env import Environment
from .results import DEFAULT_BUDGET_CAP, RunResult, drive

GROUPED_ELIMINATION = "grouped-elim"
FEASIBILITY_THEN_BAI = "feas-then-bai"


def run_grouped_elimination(env: Environment, threshold: float, delta: float, *,
                            budget_cap: int = DEFAULT_BUDGET_CAP,
                            record_trace: bool = False) -> RunResult:
    """Eliminate arms that look infeasible or worse than a confirmed-feasible arm.

    Stops with the last active arm once all its attributes are confirmed above
    the threshold, or declares the instance infeasible when no arm is left.
    """
    status = np.full(env.n_arms, K.ACTIVE, dtype=np.int8)
    return drive(GROUPED_ELIMINATION, K.grouped_elimination_loop, env, threshold, delta,
                 budget_cap, status=status, record_trace=record_trace)


def run_feasibility_then_bai(env: Environment, threshold: float, delta: float, *,
                             budget_cap: int = DEFAULT_BUDGET_CAP,
                             record_trace: bool = False) -> RunResult:
    """Classify every arm's feasibility, then run action elimination on the feasible ones.

    Each phase runs at confidence ``delta / 2``. Samples from the first phase
    carry over into the second. In the trace, ``sizes[:, 1]`` is the phase.
    """
    status = np.full(env.n_arms, K.UNCLASSIFIED, dtype=np.int8)
    return drive(FEASIBILITY_THEN_BAI, K.feasibility_then_bai_loop, env, threshold, delta,
                 budget_cap, status=status, record_trace=record_trace)
