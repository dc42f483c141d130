"""Experiment orchestration: configs, seeded replications, aggregation, persistence.

Every cell (sweep value, policy, replication) is an independent job whose
seed is a pure function of the config coordinates, so any single record can
be regenerated in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import baselines, css_lucb
from .catalog import DEFAULT_FIXED_X, EXPERIMENTS, SIZE_SWEEPS, catalog, default_sweep
from .env import Environment, parse_seed
from .instance import BETA, DEFAULT_KAPPA, ProblemInstance, analyze, load_instance
from .results import DEFAULT_BUDGET_CAP, RunResult

CUSTOM = "custom"
EXPERIMENT_IDS = EXPERIMENTS + (CUSTOM,)

POLICIES = {
    css_lucb.POLICY: css_lucb.run,
    baselines.GROUPED_ELIMINATION: baselines.run_grouped_elimination,
    baselines.FEASIBILITY_THEN_BAI: baselines.run_feasibility_then_bai,
}
POLICY_NAMES = tuple(POLICIES)

RECORD_FIELDS = (
    "experiment", "sweep_value", "policy", "seed", "hardness", "pulls", "rounds",
    "f_hat", "i_out", "correct", "stopped_by_budget",
)
SUMMARY_FIELDS = (
    "experiment", "sweep_value", "policy", "replications", "hardness", "mean_pulls",
    "std_error", "error_rate", "budget_capped",
)
SUMMARY_FORMAT = "grouped-bai-summary/1"
CONFIG_FORMAT = "grouped-bai-config/1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: which instances, which policies, how many seeded replications.

    ``sweep_values`` defaults to the catalog's sweep for the experiment. For
    ``custom`` the instance comes from ``instance_path`` and the sweep values
    are labels only.
    """

    experiment_id: str
    sweep_values: tuple = ()
    delta: float = 0.1
    replications: int = 100
    base_seed: int = 0
    policies: tuple = POLICY_NAMES
    budget_cap: int = DEFAULT_BUDGET_CAP
    fixed_x: float = DEFAULT_FIXED_X
    reward_family: str = BETA
    kappa: float = DEFAULT_KAPPA
    instance_path: Optional[str] = None

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment {self.experiment_id!r}; expected one of {EXPERIMENT_IDS}")
        values = tuple(self.sweep_values)
        if not values:
            if self.experiment_id == CUSTOM:
                values = (0,)
            else:
                values = tuple(default_sweep(self.experiment_id))
        values = tuple(_normalize_value(v) for v in values)
        if self.experiment_id in SIZE_SWEEPS:
            values = tuple(int(v) if float(v).is_integer() else v for v in values)
        object.__setattr__(self, "sweep_values", values)
        object.__setattr__(self, "policies", tuple(self.policies))
        if isinstance(self.replications, bool) or not isinstance(self.replications, int) or self.replications < 1:
            raise ConfigError(f"replications must be a positive integer, got {self.replications!r}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}; expected one of {POLICY_NAMES}")
        try:
            object.__setattr__(self, "base_seed", parse_seed(self.base_seed))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.experiment_id == CUSTOM and not self.instance_path:
            raise ConfigError("a custom experiment needs instance_path")
        # Materialize once so bad sweep values fail at load time.
        for v in self.sweep_values:
            try:
                self.instance(v)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        first_round = max(self.instance(v).means.size for v in self.sweep_values)
        if self.budget_cap < first_round:
            raise ConfigError(f"budget_cap {self.budget_cap} is below the {first_round} pulls of the first round")

    def instance(self, value) -> ProblemInstance:
        if self.experiment_id == CUSTOM:
            return _load_custom(self.instance_path)
        return _catalog_cached(self.experiment_id, value, self.fixed_x, self.reward_family, self.kappa)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["sweep_values"] = list(self.sweep_values)
        doc["policies"] = list(self.policies)
        doc["format"] = CONFIG_FORMAT
        if doc["instance_path"] is None:
            del doc["instance_path"]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be an object")
        doc = dict(doc)
        fmt = doc.pop("format", CONFIG_FORMAT)
        if fmt != CONFIG_FORMAT:
            raise ConfigError(f"unsupported config format {fmt!r}")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "experiment_id" not in doc:
            raise ConfigError("missing required field 'experiment_id'")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(doc)


@lru_cache(maxsize=256)
def _catalog_cached(experiment, value, x, family, kappa) -> ProblemInstance:
    return catalog(experiment, value, x=x, reward_family=family, kappa=kappa)


@lru_cache(maxsize=16)
def _load_custom(path) -> ProblemInstance:
    # The instance file carries its own reward family and concentration.
    return load_instance(path)


def _normalize_value(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"sweep value must be a number, got {v!r}")
    return v


def format_value(v) -> str:
    """Canonical text of a sweep value, shared by seeds and CSV files."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def derive_seed(base_seed: int, experiment: str, sweep_value, policy: str, replication: int) -> int:
    """64-bit seed for one cell; a pure function of its coordinates."""
    key = "\x1f".join([str(int(base_seed)), experiment, format_value(sweep_value), policy, str(int(replication))])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


def run_policy(policy: str, instance: ProblemInstance, seed: int, delta: float, *,
               budget_cap: int = DEFAULT_BUDGET_CAP, record_trace: bool = False) -> RunResult:
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICY_NAMES}")
    env = Environment(instance, seed)
    return POLICIES[policy](env, instance.threshold, delta, budget_cap=budget_cap, record_trace=record_trace)


@dataclass(frozen=True)
class ExperimentRecord:
    """One replication of one policy on one sweep point.

    ``i_out`` is 0-based (``None`` when the instance was declared infeasible).
    ``result`` is only present for records produced in this process.
    """

    experiment_id: str
    sweep_value: object
    policy: str
    seed: int
    hardness: float
    pulls: int
    rounds: int
    f_hat: bool
    i_out: Optional[int]
    correct: bool
    stopped_by_budget: bool
    result: Optional[RunResult] = field(default=None, compare=False, repr=False)

    @classmethod
    def from_result(cls, experiment_id, sweep_value, seed, gt, result: RunResult) -> "ExperimentRecord":
        return cls(
            experiment_id=experiment_id,
            sweep_value=sweep_value,
            policy=result.policy,
            seed=seed,
            hardness=gt.hardness,
            pulls=result.total_pulls,
            rounds=result.rounds,
            f_hat=result.feasibility_flag_hat,
            i_out=result.output_arm,
            correct=result.is_correct(gt),
            stopped_by_budget=result.stopped_by_budget,
            result=result,
        )

    def row(self) -> dict:
        return {
            "experiment": self.experiment_id,
            "sweep_value": format_value(self.sweep_value),
            "policy": self.policy,
            "seed": str(self.seed),
            "hardness": repr(float(self.hardness)),
            "pulls": str(self.pulls),
            "rounds": str(self.rounds),
            "f_hat": str(int(self.f_hat)),
            "i_out": "" if self.i_out is None else str(self.i_out + 1),
            "correct": str(int(self.correct)),
            "stopped_by_budget": str(int(self.stopped_by_budget)),
        }

    @classmethod
    def from_row(cls, row: dict) -> "ExperimentRecord":
        return cls(
            experiment_id=row["experiment"],
            sweep_value=parse_value(row["sweep_value"]),
            policy=row["policy"],
            seed=int(row["seed"]),
            hardness=float(row["hardness"]),
            pulls=int(row["pulls"]),
            rounds=int(row["rounds"]),
            f_hat=row["f_hat"] == "1",
            i_out=int(row["i_out"]) - 1 if row["i_out"] else None,
            correct=row["correct"] == "1",
            stopped_by_budget=row["stopped_by_budget"] == "1",
        )


@dataclass(frozen=True)
class Job:
    experiment_id: str
    sweep_value: object
    policy: str
    replication: int
    seed: int
    delta: float
    budget_cap: int
    instance: ProblemInstance


def jobs(config: ExperimentConfig, replications: Optional[range] = None) -> list[Job]:
    """All cells of ``config`` in output order: sweep value, then policy, then replication."""
    reps = range(config.replications) if replications is None else replications
    out = []
    for v in config.sweep_values:
        inst = config.instance(v)
        for p in config.policies:
            for r in reps:
                seed = derive_seed(config.base_seed, config.experiment_id, v, p, r)
                out.append(Job(config.experiment_id, v, p, r, seed, config.delta, config.budget_cap, inst))
    return out


def run_job(job: Job) -> ExperimentRecord:
    result = run_policy(job.policy, job.instance, job.seed, job.delta, budget_cap=job.budget_cap)
    return ExperimentRecord.from_result(job.experiment_id, job.sweep_value, job.seed, _analyze_cached(job.instance), result)


_GT_CACHE: dict = {}


def _analyze_cached(instance: ProblemInstance):
    key = (instance.means.tobytes(), instance.means.shape, instance.threshold)
    if key not in _GT_CACHE:
        _GT_CACHE[key] = analyze(instance)
    return _GT_CACHE[key]


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   replications: Optional[range] = None) -> list[ExperimentRecord]:
    """Run every cell of ``config``; the record order never depends on ``workers``.

    ``replications`` restricts the run to a sub-range of replication indices
    (useful for extending an existing run without recomputing it).
    """
    todo = jobs(config, replications)
    if workers <= 1:
        return [run_job(j) for j in todo]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, todo, chunksize=max(1, len(todo) // (8 * workers))))


@dataclass(frozen=True)
class SummaryRow:
    experiment_id: str
    sweep_value: object
    policy: str
    replications: int
    hardness: float
    mean_pulls: float
    std_error: float
    error_rate: float
    budget_capped: int

    def row(self) -> dict:
        return {
            "experiment": self.experiment_id,
            "sweep_value": format_value(self.sweep_value),
            "policy": self.policy,
            "replications": str(self.replications),
            "hardness": repr(float(self.hardness)),
            "mean_pulls": repr(float(self.mean_pulls)),
            "std_error": repr(float(self.std_error)),
            "error_rate": repr(float(self.error_rate)),
            "budget_capped": str(self.budget_capped),
        }

    def to_json(self) -> dict:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        doc["hardness"] = _json_num(self.hardness)
        return doc

    @classmethod
    def from_row(cls, row: dict) -> "SummaryRow":
        return cls(
            experiment_id=row["experiment"],
            sweep_value=parse_value(row["sweep_value"]),
            policy=row["policy"],
            replications=int(row["replications"]),
            hardness=float(row["hardness"]),
            mean_pulls=float(row["mean_pulls"]),
            std_error=float(row["std_error"]),
            error_rate=float(row["error_rate"]),
            budget_capped=int(row["budget_capped"]),
        )


def _json_num(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def aggregate(records: Sequence[ExperimentRecord]) -> list[SummaryRow]:
    """Mean pulls, standard error, error rate and H_id per (sweep value, policy).

    Groups appear in first-seen order. The standard error uses the sample
    standard deviation and is 0 for a single replication.
    """
    if not records:
        raise ValueError("cannot aggregate an empty record set")
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.experiment_id, rec.sweep_value, rec.policy), []).append(rec)
    out = []
    for (exp, value, policy), recs in groups.items():
        pulls = np.array([r.pulls for r in recs], dtype=float)
        n = len(recs)
        se = float(pulls.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(SummaryRow(
            experiment_id=exp,
            sweep_value=value,
            policy=policy,
            replications=n,
            hardness=recs[0].hardness,
            mean_pulls=float(pulls.mean()),
            std_error=se,
            error_rate=sum(not r.correct for r in recs) / n,
            budget_capped=sum(r.stopped_by_budget for r in recs),
        ))
    return out


def write_records(records: Iterable[ExperimentRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RECORD_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow(rec.row())


def _read_csv(path, fields) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in fields if f not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        return list(reader)


def read_records(path: str | Path) -> list[ExperimentRecord]:
    return [ExperimentRecord.from_row(r) for r in _read_csv(path, RECORD_FIELDS)]


def write_summary(rows: Sequence[SummaryRow], csv_path: str | Path, json_path: Optional[str | Path] = None) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.row())
    if json_path is not None:
        doc = {"format": SUMMARY_FORMAT, "rows": [r.to_json() for r in rows]}
        Path(json_path).write_text(json.dumps(doc, indent=2) + "\n")


def read_summary(path: str | Path) -> list[SummaryRow]:
    return [SummaryRow.from_row(r) for r in _read_csv(path, SUMMARY_FIELDS)]


def is_size_sweep(experiment_id: str) -> bool:
    return experiment_id in SIZE_SWEEPS
