"""Problem instances and their ground-truth analytics.

Arms and attributes are 0-based everywhere in this module. Conversion to the
1-based convention used in files and reports happens at the I/O boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

BERNOULLI = "bernoulli"
BETA = "beta"
REWARD_FAMILIES = (BERNOULLI, BETA)
DEFAULT_KAPPA = 2.0

# Arm means closer than this are treated as tied.
TIE_TOL = 1e-9


class InstanceError(ValueError):
    """Raised when an instance violates a model invariant.

    ``row``/``col`` are 1-based positions of the first offending entry of the
    mean matrix, when the error is tied to one.
    """

    def __init__(self, message: str, row: Optional[int] = None, col: Optional[int] = None):
        self.row = row
        self.col = col
        where = ""
        if row is not None:
            where = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + where)


class DegenerateInstanceError(ValueError):
    """A gap needed by the hardness index is zero, so the index is infinite."""


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    means: np.ndarray
    threshold: float
    reward_family: str = BETA
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        if means.ndim != 2 or means.shape[0] < 1 or means.shape[1] < 1:
            raise InstanceError(f"means must be a non-empty N x M matrix, got shape {means.shape}")
        bad = np.argwhere(~((means >= 0.0) & (means <= 1.0)))
        if len(bad):
            i, j = bad[0]
            raise InstanceError(f"mean {means[i, j]!r} outside [0, 1]", int(i) + 1, int(j) + 1)
        if not 0.0 <= self.threshold <= 1.0:
            raise InstanceError(f"threshold {self.threshold!r} outside [0, 1]")
        if self.reward_family not in REWARD_FAMILIES:
            raise InstanceError(f"unknown reward family {self.reward_family!r}")
        if self.reward_family == BETA and not self.kappa > 0:
            raise InstanceError(f"beta concentration must be positive, got {self.kappa!r}")
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "threshold", float(self.threshold))
        object.__setattr__(self, "kappa", float(self.kappa))

        feasible = np.flatnonzero(means.min(axis=1) >= self.threshold)
        if len(feasible) > 1:
            arm_means = self.arm_means
            top = arm_means[feasible].max()
            tied = feasible[np.abs(arm_means[feasible] - top) <= TIE_TOL]
            if len(tied) > 1:
                raise InstanceError(
                    "best feasible arm is not unique: arms "
                    + ", ".join(str(i + 1) for i in tied)
                    + f" share mean {top:.6g}",
                    int(tied[1]) + 1,
                )

    @property
    def n_arms(self) -> int:
        return self.means.shape[0]

    @property
    def n_attrs(self) -> int:
        return self.means.shape[1]

    @property
    def arm_means(self) -> np.ndarray:
        return self.means.sum(axis=1) / self.n_attrs

    def to_dict(self) -> dict:
        doc = {
            "threshold": self.threshold,
            "reward_family": self.reward_family,
            "means": self.means.tolist(),
        }
        if self.reward_family == BETA:
            doc["concentration"] = self.kappa
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemInstance":
        if not isinstance(doc, dict):
            raise InstanceError("instance document must be an object")
        unknown = set(doc) - {"threshold", "reward_family", "concentration", "means"}
        if unknown:
            raise InstanceError(f"unknown instance fields: {sorted(unknown)}")
        for key in ("threshold", "means"):
            if key not in doc:
                raise InstanceError(f"missing required field {key!r}")
        rows = doc["means"]
        if not isinstance(rows, list) or not rows:
            raise InstanceError("means must be a non-empty list of rows")
        width = None
        for r, row in enumerate(rows, start=1):
            if not isinstance(row, list) or not row:
                raise InstanceError("each row of means must be a non-empty list", r)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InstanceError(f"ragged matrix: expected {width} columns, got {len(row)}", r)
            for c, v in enumerate(row, start=1):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise InstanceError(f"non-numeric mean {v!r}", r, c)
        threshold = doc["threshold"]
        if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
            raise InstanceError(f"threshold must be a number, got {threshold!r}")
        family = doc.get("reward_family", BETA)
        kappa = doc.get("concentration", DEFAULT_KAPPA)
        return cls(np.array(rows, dtype=float), float(threshold), family, float(kappa))


def load_instance(path: str | Path) -> ProblemInstance:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    return ProblemInstance.from_dict(doc)


def save_instance(instance: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class GroundTruth:
    """Quantities derived from the true means.

    ``gaps[i]`` is the distance of arm ``i``'s mean to the best feasible arm for
    arms in the sub-optimal set, and the distance to the runner-up for the best
    arm itself (``inf`` when there is no sub-optimal arm). It is ``nan`` where
    undefined.
    """

    n_arms: int
    n_attrs: int
    threshold: float
    means: np.ndarray
    feasible: frozenset
    best_arm: Optional[int]
    arm_means: np.ndarray
    suboptimal: frozenset
    risky: frozenset
    second_best: Optional[int]
    gaps: np.ndarray
    attr_gaps: np.ndarray
    arm_attr_gaps: np.ndarray
    separator: float
    hardness: float = field(default=math.inf)

    @property
    def feasibility_flag(self) -> bool:
        return bool(self.feasible)

    @property
    def infeasible(self) -> frozenset:
        return frozenset(range(self.n_arms)) - self.feasible


def analyze(instance: ProblemInstance) -> GroundTruth:
    """Compute feasibility, arm classes, gaps, separator and hardness."""
    means = instance.means
    n, m = means.shape
    th = instance.threshold
    arm_means = instance.arm_means
    feasible = frozenset(int(i) for i in np.flatnonzero(means.min(axis=1) >= th))

    best = second = None
    gaps = np.full(n, np.nan)
    if feasible:
        best = max(feasible, key=lambda i: (arm_means[i], -i))
        suboptimal = frozenset(i for i in range(n) if arm_means[i] < arm_means[best] - TIE_TOL)
        risky = frozenset(range(n)) - suboptimal - {best}
        for i in suboptimal:
            gaps[i] = abs(arm_means[best] - arm_means[i])
        if suboptimal:
            top2 = max(arm_means[i] for i in suboptimal)
            second = min(i for i in suboptimal if arm_means[i] >= top2 - TIE_TOL)
            gaps[best] = abs(arm_means[best] - arm_means[second])
            separator = (arm_means[best] + arm_means[second]) / 2
        else:
            gaps[best] = math.inf
            separator = -math.inf
    else:
        suboptimal = frozenset()
        risky = frozenset(range(n))
        separator = -math.inf

    attr_gaps = np.abs(means - th)
    arm_attr_gaps = np.abs(means.min(axis=1) - th)
    gt = GroundTruth(
        n_arms=n,
        n_attrs=m,
        threshold=th,
        means=means,
        feasible=feasible,
        best_arm=best,
        arm_means=arm_means,
        suboptimal=suboptimal,
        risky=risky,
        second_best=second,
        gaps=gaps,
        attr_gaps=attr_gaps,
        arm_attr_gaps=arm_attr_gaps,
        separator=separator,
    )
    try:
        h = hardness_index(gt)
    except DegenerateInstanceError:
        h = math.inf
    object.__setattr__(gt, "hardness", h)
    return gt


def _inv_sq(x: float) -> float:
    if x == 0:
        raise DegenerateInstanceError("zero gap in hardness index")
    return 1.0 / (x * x)


def hardness_index(gt: GroundTruth) -> float:
    """Instance hardness: a sum of inverse squared gaps over arm classes.

    Without a feasible arm the index is the sum of ``1/attr_gap**2`` over all
    arms. Without a sub-optimal arm the best arm's term uses its attribute gap
    alone.
    """
    if gt.best_arm is None:
        return float(sum(_inv_sq(gt.arm_attr_gaps[k]) for k in range(gt.n_arms)))
    b = gt.best_arm
    infeasible = gt.infeasible
    h = _inv_sq(min(gt.gaps[b] / 2, gt.arm_attr_gaps[b]))
    for i in gt.feasible & gt.suboptimal:
        h += _inv_sq(gt.gaps[i] / 2)
    for i in infeasible & gt.risky:
        h += _inv_sq(gt.arm_attr_gaps[i])
    for i in infeasible & gt.suboptimal:
        h += _inv_sq(max(gt.gaps[i] / 2, gt.arm_attr_gaps[i]))
    return float(h)


@dataclass(frozen=True)
class LowerBoundReport:
    """Instance-dependent lower bound on expected sample complexity.

    A constant is ``None`` when the arm class it covers is empty.
    ``heuristic`` marks non-Bernoulli instances, for which the bound was not
    derived. ``vacuous`` marks a zero bound.
    """

    c1: Optional[float]
    c2: Optional[float]
    c3: Optional[float]
    constant: float
    samples: float
    hardness: float
    delta: float
    heuristic: bool = False
    vacuous: bool = False

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None else float(x)

        return {
            "c1": num(self.c1),
            "c2": num(self.c2),
            "c3": num(self.c3),
            "constant": float(self.constant),
            "samples": float(self.samples),
            "hardness": float(self.hardness),
            "delta": float(self.delta),
            "heuristic": bool(self.heuristic),
            "vacuous": bool(self.vacuous),
        }


def _min_complement(q: float) -> float:
    return min(q, 1.0 - q)


def lower_bound(instance: ProblemInstance, gt: GroundTruth, delta: float) -> LowerBoundReport:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not math.isfinite(gt.hardness):
        raise DegenerateInstanceError("hardness index is infinite; lower bound undefined")
    means = instance.means
    m = instance.n_attrs
    th = instance.threshold
    infeasible = gt.infeasible

    c1 = c2 = c3 = None
    risky_infeasible = sorted(infeasible & gt.risky)
    if risky_infeasible:
        c_a = math.inf
        widest = 0
        for k in risky_infeasible:
            below = means[k] < th
            q = (means[k][~below].sum() + below.sum() * th) / m
            c_a = min(c_a, _min_complement(q))
            widest = max(widest, int(below.sum()))
        c1 = m * m * c_a / (2 * widest * widest)
    if gt.best_arm is not None:
        b = gt.best_arm
        mu_b = gt.arm_means[b]
        q = mu_b - (means[b].min() - th) / m
        c2 = min(m * m * _min_complement(q) / 2, _min_complement(mu_b) / 16)
        if infeasible & gt.suboptimal:
            c3 = _min_complement(mu_b) / 8

    constant = min(c for c in (c1, c2, c3) if c is not None)
    constant = max(constant, 0.0)
    samples = max(math.log(1.0 / (2.4 * delta)) * constant * gt.hardness, 0.0)
    return LowerBoundReport(
        c1=c1,
        c2=c2,
        c3=c3,
        constant=constant,
        samples=samples,
        hardness=gt.hardness,
        delta=delta,
        heuristic=instance.reward_family != BERNOULLI,
        vacuous=samples == 0.0,
    )


def ground_truth_dict(gt: GroundTruth) -> dict:
    """Report-friendly view of ``gt`` with 1-based arm indices."""

    def arms(s):
        return sorted(i + 1 for i in s)

    def num(x):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x

    return {
        "n_arms": gt.n_arms,
        "n_attrs": gt.n_attrs,
        "threshold": gt.threshold,
        "feasible": arms(gt.feasible),
        "feasibility_flag": int(gt.feasibility_flag),
        "best_arm": None if gt.best_arm is None else gt.best_arm + 1,
        "second_best": None if gt.second_best is None else gt.second_best + 1,
        "suboptimal": arms(gt.suboptimal),
        "risky": arms(gt.risky),
        "arm_means": [num(x) for x in gt.arm_means],
        "gaps": [num(x) for x in gt.gaps],
        "arm_attr_gaps": [num(x) for x in gt.arm_attr_gaps],
        "attr_gaps": [[num(x) for x in row] for row in gt.attr_gaps],
        "separator": num(gt.separator),
        "hardness": num(gt.hardness),
    }
