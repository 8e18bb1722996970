"""Hyperparameter search: random draws from discrete grids, median pruning,
and top-candidate confirmation on the novel split.

Each trial evaluates its configuration on validation tasks.  After the
first 100 tasks a trial whose running mean falls below the median of the
earlier trials' own first-100 means is stopped.  Completed trials are
ranked by their full validation mean and the best few re-evaluated on
the novel split.  Every trial appends one JSON line to the log, which
also records the median used at its prune decision, so an interrupted
search resumes to the identical sequence.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._rng import TAG_CONFIG, TAG_CONFIRM, TAG_TRIAL, derive_seed, spawn_rng
from .calibrate import CovMode, GdcConfig
from .dataset import FeatureDataset, partition
from .episodes import (
    EpisodeProtocol,
    EpisodeResult,
    evaluate,
    prepare_base_stats,
    run_tasks,
    task_seed_for,
)
from .stats import DistanceMetric, MetricKind

PRUNE_AFTER = 100
TASKS_PER_TRIAL = 200


@dataclass(frozen=True)
class GridRange:
    low: float
    high: float
    step: float

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.high < self.low:
            raise ValueError(f"empty grid range [{self.low}, {self.high}]")

    def values(self) -> np.ndarray:
        count = int(np.floor((self.high - self.low) / self.step + 1e-9)) + 1
        return self.low + self.step * np.arange(count)


@dataclass(frozen=True)
class SearchSpace:
    beta: GridRange = GridRange(0.0, 10.0, 0.25)
    m: GridRange = GridRange(0.0, 3.0, 0.25)
    k: GridRange = GridRange(2, 64, 2)
    n: GridRange = GridRange(100, 1000, 50)
    alpha1: GridRange = GridRange(0, 10000, 1000)
    alpha2_multipliers: tuple[float, ...] = (0.0, 0.1, 1.0, 10.0, 100.0)
    metrics: tuple[DistanceMetric, ...] = (DistanceMetric(),)
    delta: GridRange = GridRange(0.5, 1.5, 0.1)
    cov_mode: CovMode = CovMode.WEIGHTED_AVERAGE

    def __post_init__(self) -> None:
        if not self.alpha2_multipliers or not self.metrics:
            raise ValueError("alpha2 multiplier set and metric set must be non-empty")


def mini_cub_space(num_base_classes: int) -> SearchSpace:
    """Wide alpha1 grid with a small multiplier set for alpha2."""
    return SearchSpace(k=GridRange(2, num_base_classes, 2))


def dogs_space(num_base_classes: int) -> SearchSpace:
    """Narrow alpha1 grid with a wide multiplier grid for alpha2."""
    return SearchSpace(
        k=GridRange(2, num_base_classes, 2),
        alpha1=GridRange(0, 1000, 100),
        alpha2_multipliers=tuple(float(v) for v in range(0, 1001, 100)),
    )


class TrialStatus(str, Enum):
    RUNNING = "running"
    PRUNED = "pruned"
    COMPLETE = "complete"
    # configs drawn from the wide shrinkage grids can produce covariances
    # with no positive-definite repair; such trials are recorded and skipped
    FAILED = "failed"


@dataclass
class TrialRecord:
    trial_index: int
    config: GdcConfig
    status: TrialStatus
    accuracies: list[float] = field(default_factory=list)
    median_at_decision: float | None = None
    final_validation_mean: float | None = None
    error: str | None = None

    def mean_at(self, count: int = PRUNE_AFTER) -> float:
        return float(np.mean(self.accuracies[:count]))


@dataclass(frozen=True)
class ConfirmedCandidate:
    trial_index: int
    config: GdcConfig
    validation_mean: float
    novel: EpisodeResult


def sample_config(space: SearchSpace, trial_seed: int) -> GdcConfig:
    """Uniform independent draw from each discretized range; the drawn
    config carries trial_seed as its sampling seed."""
    rng = spawn_rng(TAG_CONFIG, trial_seed)

    def draw(grid: GridRange) -> float:
        vals = grid.values()
        return float(vals[rng.integers(len(vals))])

    beta = draw(space.beta)
    m = draw(space.m)
    k = int(round(draw(space.k)))
    n = int(round(draw(space.n)))
    alpha1 = draw(space.alpha1)
    mult = float(
        space.alpha2_multipliers[rng.integers(len(space.alpha2_multipliers))]
    )
    metric = space.metrics[rng.integers(len(space.metrics))]
    if metric.kind is MetricKind.SQUARED_DELTA:
        metric = DistanceMetric(kind=metric.kind, delta=draw(space.delta))
    return GdcConfig(
        beta=beta,
        m=m,
        k=k,
        alpha1=alpha1,
        alpha2=mult * alpha1,
        n_samples=n,
        metric=metric,
        cov_mode=space.cov_mode,
        seed=trial_seed,
    )


def median_basis(records: list[TrialRecord], prune_after: int = PRUNE_AFTER) -> float | None:
    """Median of all finished trials' first-``prune_after`` means."""
    means = [
        r.mean_at(prune_after)
        for r in records
        if r.status is not TrialStatus.RUNNING and len(r.accuracies) >= prune_after
    ]
    return float(np.median(means)) if means else None


def run_trial(
    dataset: FeatureDataset,
    config: GdcConfig,
    protocol: EpisodeProtocol,
    base_seed: int,
    median_at_100: float | None,
    trial_index: int = 0,
    tasks_per_trial: int = TASKS_PER_TRIAL,
    prune_after: int = PRUNE_AFTER,
    workers: int = 1,
) -> TrialRecord:
    """Evaluate up to ``tasks_per_trial`` validation tasks, stopping after
    ``prune_after`` if the running mean is below the supplied median.  A
    pipeline failure (unrepairable covariance, diverged training) marks the
    trial failed instead of aborting the search."""
    first = min(prune_after, tasks_per_trial)
    seeds = [task_seed_for(base_seed, i) for i in range(tasks_per_trial)]
    accs: list[float] = []
    try:
        choice, base_stats = prepare_base_stats(dataset, config)
        part = partition(dataset, "validation")
        accs = run_tasks(part, base_stats, config, protocol, seeds[:first], choice, workers=workers)
        if (
            tasks_per_trial > prune_after
            and median_at_100 is not None
            and float(np.mean(accs)) < median_at_100
        ):
            return TrialRecord(
                trial_index=trial_index,
                config=config,
                status=TrialStatus.PRUNED,
                accuracies=[float(a) for a in accs],
                median_at_decision=median_at_100,
            )
        accs += run_tasks(part, base_stats, config, protocol, seeds[first:], choice, workers=workers)
    except RuntimeError as exc:
        return TrialRecord(
            trial_index=trial_index,
            config=config,
            status=TrialStatus.FAILED,
            accuracies=[float(a) for a in accs],
            median_at_decision=median_at_100,
            error=str(exc),
        )
    return TrialRecord(
        trial_index=trial_index,
        config=config,
        status=TrialStatus.COMPLETE,
        accuracies=[float(a) for a in accs],
        median_at_decision=median_at_100,
        final_validation_mean=float(np.mean(accs)),
    )


def confirm_top(
    dataset: FeatureDataset,
    records: list[TrialRecord],
    protocol: EpisodeProtocol,
    top_n: int = 3,
    novel_tasks: int = 5000,
    base_seed: int = 0,
    workers: int = 1,
) -> list[ConfirmedCandidate]:
    """Re-evaluate the best completed configs on the novel split; result is
    ordered by novel mean, descending."""
    completed = [r for r in records if r.status is TrialStatus.COMPLETE]
    if len(completed) < top_n:
        raise ValueError(f"need {top_n} completed trials, have {len(completed)}")
    completed.sort(key=lambda r: (-(r.final_validation_mean or 0.0), r.trial_index))
    confirm_seed = derive_seed(TAG_CONFIRM, base_seed)
    out = []
    for rec in completed[:top_n]:
        result = evaluate(
            dataset, "novel", rec.config, protocol, novel_tasks, confirm_seed, workers=workers
        )
        out.append(
            ConfirmedCandidate(
                trial_index=rec.trial_index,
                config=rec.config,
                validation_mean=float(rec.final_validation_mean or 0.0),
                novel=result,
            )
        )
    out.sort(key=lambda c: (-c.novel.mean, c.trial_index))
    return out


# -- trial log ---------------------------------------------------------------


def record_to_json(rec: TrialRecord) -> dict:
    return {
        "trial_index": rec.trial_index,
        "config": rec.config.to_dict(),
        "status": rec.status.value,
        "accuracies": rec.accuracies,
        "median_at_decision": rec.median_at_decision,
        "final_validation_mean": rec.final_validation_mean,
        "error": rec.error,
    }


def record_from_json(doc: dict) -> TrialRecord:
    return TrialRecord(
        trial_index=int(doc["trial_index"]),
        config=GdcConfig.from_dict(doc["config"]),
        status=TrialStatus(doc["status"]),
        accuracies=[float(a) for a in doc["accuracies"]],
        median_at_decision=doc.get("median_at_decision"),
        final_validation_mean=doc.get("final_validation_mean"),
        error=doc.get("error"),
    )


def read_trial_log(path: str | Path) -> list[TrialRecord]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValueError(f"{path}: bad trial log line {lineno}: {exc}") from exc
    return records


def append_trial_log(rec: TrialRecord, path: str | Path) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record_to_json(rec), sort_keys=True) + "\n")


def tune(
    dataset: FeatureDataset,
    space: SearchSpace,
    protocol: EpisodeProtocol,
    num_trials: int,
    master_seed: int,
    log_path: str | Path | None = None,
    tasks_per_trial: int = TASKS_PER_TRIAL,
    prune_after: int = PRUNE_AFTER,
    workers: int = 1,
) -> list[TrialRecord]:
    """Run (or resume) the trial sequence determined by the master seed."""
    records = read_trial_log(log_path) if log_path else []
    if len(records) > num_trials:
        raise ValueError(
            f"log already holds {len(records)} trials, more than the requested {num_trials}"
        )
    for idx, rec in enumerate(records):
        expected = sample_config(space, derive_seed(TAG_TRIAL, master_seed, idx))
        if rec.trial_index != idx or rec.config != expected:
            raise ValueError(
                f"trial log entry {idx} does not match this search space and seed; "
                f"refusing to resume"
            )
    for idx in range(len(records), num_trials):
        trial_seed = derive_seed(TAG_TRIAL, master_seed, idx)
        config = sample_config(space, trial_seed)
        basis = median_basis(records, prune_after)
        rec = run_trial(
            dataset,
            config,
            protocol,
            base_seed=trial_seed,
            median_at_100=basis,
            trial_index=idx,
            tasks_per_trial=tasks_per_trial,
            prune_after=prune_after,
            workers=workers,
        )
        records.append(rec)
        if log_path:
            append_trial_log(rec, log_path)
    return records
