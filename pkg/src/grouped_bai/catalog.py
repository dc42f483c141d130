"""Benchmark instances with one swept parameter ``x``.

``exp1``-``exp3`` sweep one attribute mean. ``varyN``/``varyM`` sweep the
number of arms/attributes with ``x`` held fixed.
"""

from __future__ import annotations

import numpy as np

from .instance import BETA, DEFAULT_KAPPA, ProblemInstance

X = None  # placeholder for the swept mean

_TABLES = {
    # Harder feasibility check on the best arm as x -> 0.3.
    "exp1": dict(
        threshold=0.3,
        x_range=(0.31, 0.35),
        rows=[
            [X, 0.6, 0.7, 0.6, 0.7],
            [0.4, 0.2, 0.4, 0.4, 0.45],
            [0.15, 0.7, 0.8, 0.9, 0.9],
            [X, 0.35, 0.35, 0.35, 0.4],
            [X, 0.35, 0.35, 0.35, 0.35],
        ],
    ),
    # Feasible runner-up closes in on the best arm as x grows.
    "exp2": dict(
        threshold=0.3,
        x_range=(0.5, 0.7),
        rows=[
            [0.7, 0.6, 0.8, 0.7, 0.9],
            [0.7, X, 0.7, 0.7, 0.8],
            [0.15, 0.7, 0.8, 0.9, 0.9],
            [0.15, 0.9, 0.9, 0.9, 0.8],
            [0.1, 0.9, 0.9, 0.8, 0.8],
        ],
    ),
    # The highest-mean arm is infeasible, and harder to rule out as x -> 0.35.
    "exp3": dict(
        threshold=0.35,
        x_range=(0.05, 0.3),
        rows=[
            [0.5, 0.6, 0.6, 0.5, 0.8],
            [0.7, 0.5, 0.4, 0.4, 0.6],
            [X, 0.5, 0.9, 0.8, 0.9],
            [0.6, 0.2, 0.4, 0.7, 0.6],
            [0.3, 0.7, 0.4, 0.9, 0.5],
        ],
    ),
    "varyN": dict(
        threshold=0.5,
        x_range=(0.38, 0.46),
        sizes=(4, 5, 6),
        rows=[
            [0.6, 0.7],
            [X, 0.9],
            [0.3, 0.55],
            [0.55, 0.55],
            [0.2, 0.4],
            [0.55, 0.6],
        ],
    ),
    "varyM": dict(
        threshold=0.5,
        x_range=(0.38, 0.46),
        sizes=(2, 3, 4),
        rows=[
            [0.55, 0.6, 0.65, 0.7],
            [X, 0.9, 0.7, 0.8],
            [0.3, 0.55, 0.4, 0.6],
            [0.55, 0.55, 0.55, 0.55],
            [0.2, 0.4, 0.3, 0.55],
        ],
    ),
}

EXPERIMENTS = tuple(_TABLES)
MEAN_SWEEPS = ("exp1", "exp2", "exp3")
SIZE_SWEEPS = ("varyN", "varyM")
DEFAULT_FIXED_X = 0.42
SWEEP_POINTS = 5


def x_range(experiment: str) -> tuple[float, float]:
    return _TABLES[_check(experiment)]["x_range"]


def default_sweep(experiment: str) -> list:
    """Five evenly spaced x values for mean sweeps, the table sizes otherwise."""
    table = _TABLES[_check(experiment)]
    if experiment in SIZE_SWEEPS:
        return list(table["sizes"])
    lo, hi = table["x_range"]
    return [round(float(v), 10) for v in np.linspace(lo, hi, SWEEP_POINTS)]


def _check(experiment: str) -> str:
    if experiment not in _TABLES:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    return experiment


def catalog(experiment: str, value, *, x: float = DEFAULT_FIXED_X,
            reward_family: str = BETA, kappa: float = DEFAULT_KAPPA) -> ProblemInstance:
    """Materialize the instance of ``experiment`` at sweep value ``value``.

    For ``exp1``-``exp3`` the value is x itself. For ``varyN``/``varyM`` it is
    the number of arms/attributes, and ``x`` gives the fixed swept mean.
    """
    table = _TABLES[_check(experiment)]
    lo, hi = table["x_range"]
    if experiment in SIZE_SWEEPS:
        size = int(value)
        if size != value or size not in table["sizes"]:
            raise ValueError(f"{experiment} size must be one of {table['sizes']}, got {value!r}")
        x_val = x
    else:
        x_val = float(value)
    if not lo - 1e-12 <= x_val <= hi + 1e-12:
        raise ValueError(f"{experiment}: x = {x_val} outside [{lo}, {hi}]")
    rows = [[x_val if v is X else v for v in row] for row in table["rows"]]
    means = np.array(rows, dtype=float)
    if experiment == "varyN":
        means = means[:size]
    elif experiment == "varyM":
        means = means[:, :size]
    return ProblemInstance(means, table["threshold"], reward_family, kappa)
