"""Run results, per-round traces, and the driver for the compiled loops."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels as K
from .env import Environment

DEFAULT_BUDGET_CAP = 10**8

TRACE_FORMAT = "grouped-bai-trace/1"


@dataclass
class Trace:
    """Columnar per-round trace, one row per classification round (t >= 2).

    Row ``r`` holds the state *before* the pulls of round ``round[r]``:
    per-arm pull counts and per-pair reward sums, the arms chosen for the
    round (``candidate``/``competitor``, -1 when absent), ``star`` (the
    confirmed leader, -1 when absent), three set sizes and a stop flag.
    ``mask`` is the per-arm feasible-set membership for CSS-LUCB and the
    set of arms pulled this round for the elimination baselines.

    For CSS-LUCB the sizes are (|F_t|, |F_Pt|, |P_t|). The baselines store
    (arms pulled, confirmed arms or phase, 0).
    """

    policy: str
    n_arms: int
    n_attrs: int
    threshold: float
    delta: float
    round: np.ndarray
    candidate: np.ndarray
    competitor: np.ndarray
    star: np.ndarray
    sizes: np.ndarray
    stop: np.ndarray
    counts: np.ndarray
    sums: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return len(self.round)

    @property
    def emp_means(self) -> np.ndarray:
        return self.sums / self.counts[:, :, None]

    def pulled_pairs(self, r: int) -> list[tuple[int, int]]:
        if self.policy == "css-lucb":
            arms = [a for a in (self.candidate[r], self.competitor[r]) if a >= 0]
            if self.stop[r]:
                arms = []
        else:
            arms = [] if self.stop[r] else list(np.flatnonzero(self.mask[r]))
        return [(int(a), j) for a in arms for j in range(self.n_attrs)]

    def write_jsonl(self, path: str | Path) -> None:
        """One JSON object per line; arm and attribute indices are 1-based."""
        with open(path, "w") as fh:
            header = {
                "format": TRACE_FORMAT,
                "policy": self.policy,
                "n_arms": self.n_arms,
                "n_attrs": self.n_attrs,
                "threshold": self.threshold,
                "delta": self.delta,
            }
            fh.write(json.dumps(header) + "\n")
            for r in range(len(self)):
                rec = {
                    "t": int(self.round[r]),
                    "pulled": [[i + 1, j + 1] for i, j in self.pulled_pairs(r)],
                    "sizes": [int(x) for x in self.sizes[r]],
                    "i_t": _one_based(self.candidate[r]),
                    "c_t": _one_based(self.competitor[r]),
                    "star": _one_based(self.star[r]),
                    "stop": bool(self.stop[r]),
                    "mask": [int(x) for x in self.mask[r]],
                    "counts": [int(x) for x in self.counts[r]],
                    "sums": self.sums[r].tolist(),
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "Trace":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("format") != TRACE_FORMAT:
                raise ValueError(f"not a trace file: {path}")
            rows = [json.loads(line) for line in fh if line.strip()]

        def zero_based(v):
            return -1 if v is None else v - 1

        return cls(
            policy=header["policy"],
            n_arms=header["n_arms"],
            n_attrs=header["n_attrs"],
            threshold=header["threshold"],
            delta=header["delta"],
            round=np.array([r["t"] for r in rows], dtype=np.int64),
            candidate=np.array([zero_based(r["i_t"]) for r in rows], dtype=np.int64),
            competitor=np.array([zero_based(r["c_t"]) for r in rows], dtype=np.int64),
            star=np.array([zero_based(r["star"]) for r in rows], dtype=np.int64),
            sizes=np.array([r["sizes"] for r in rows], dtype=np.int64).reshape(-1, 3),
            stop=np.array([r["stop"] for r in rows], dtype=bool),
            counts=np.array([r["counts"] for r in rows], dtype=np.int64).reshape(-1, header["n_arms"]),
            sums=np.array([r["sums"] for r in rows], dtype=np.float64).reshape(
                -1, header["n_arms"], header["n_attrs"]
            ),
            mask=np.array([r["mask"] for r in rows], dtype=np.int8).reshape(-1, header["n_arms"]),
        )


def _one_based(v) -> Optional[int]:
    return None if v < 0 else int(v) + 1


@dataclass
class RunResult:
    policy: str
    feasibility_flag_hat: bool
    output_arm: Optional[int]
    total_pulls: int
    rounds: int
    pulls_matrix: np.ndarray
    stopped_by_budget: bool = False
    trace: Optional[Trace] = field(default=None, repr=False)

    def __post_init__(self):
        if self.feasibility_flag_hat != (self.output_arm is not None):
            raise ValueError("an output arm is reported exactly when the instance is declared feasible")

    def is_correct(self, gt) -> bool:
        return self.feasibility_flag_hat == gt.feasibility_flag and self.output_arm == gt.best_arm


def _empty_trace(cap: int, n: int, m: int):
    return (
        np.zeros((cap, 8), dtype=np.int64),
        np.zeros((cap, n), dtype=np.int64),
        np.zeros((cap, n, m), dtype=np.float64),
        np.zeros((cap, n), dtype=np.int8),
    )


def _grow(arrays, cap):
    return tuple(np.concatenate([a, np.zeros_like(a[: max(cap, 1)])]) for a in arrays)


def drive(policy: str, loop, env: Environment, threshold: float, delta: float,
          budget_cap: int, status: Optional[np.ndarray] = None,
          record_trace: bool = False) -> RunResult:
    """Run a compiled loop to completion against ``env``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    n, m = env.n_arms, env.n_attrs
    if budget_cap < n * m:
        raise ValueError(f"budget_cap {budget_cap} is below the {n * m} pulls of the first round")
    counts = np.zeros(n, dtype=np.int64)
    sums = np.zeros((n, m), dtype=np.float64)
    ctr = np.zeros(7, dtype=np.int64)
    ctr[K.C_ROUND] = 1
    tr = _empty_trace(1024 if record_trace else 1, n, m)
    state_args = (counts, sums) if status is None else (counts, sums, status)
    while True:
        code = loop(env.buf, env.pos, env.filled, *state_args, ctr, float(threshold),
                    float(delta), int(budget_cap), record_trace, *tr)
        if code == K.NEED_REFILL:
            env.refill(int(ctr[K.C_REFILL]))
        elif code == K.TRACE_FULL:
            tr = _grow(tr, len(tr[0]))
        else:
            break
    trace = None
    if record_trace:
        rows = int(ctr[K.C_TRACE])
        tr_int, tr_counts, tr_sums, tr_mask = (a[:rows].copy() for a in tr)
        trace = Trace(
            policy=policy, n_arms=n, n_attrs=m, threshold=float(threshold), delta=float(delta),
            round=tr_int[:, 0], candidate=tr_int[:, 1], competitor=tr_int[:, 2],
            star=tr_int[:, 3], sizes=tr_int[:, 4:7], stop=tr_int[:, 7].astype(bool),
            counts=tr_counts, sums=tr_sums, mask=tr_mask,
        )
    f_hat = bool(ctr[K.C_FHAT])
    out = int(ctr[K.C_OUT])
    return RunResult(
        policy=policy,
        feasibility_flag_hat=f_hat,
        output_arm=out if f_hat else None,
        total_pulls=int(ctr[K.C_PULLS]),
        rounds=int(ctr[K.C_ROUND]) - 1,
        pulls_matrix=np.repeat(counts[:, None], m, axis=1),
        stopped_by_budget=code == K.BUDGET,
        trace=trace,
    )
