"""Episodic N-way K-shot evaluation.

Tasks are sampled with per-task seeds derived from a base seed, run
through transform -> calibrate -> augment -> classify, and aggregated
into a mean accuracy with a 95% confidence interval.  Per-task seeding
makes results independent of worker count and schedule.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import TAG_TASK, TAG_TRAIN, derive_seed, spawn_rng
from .calibrate import GdcConfig
from .classify import TrainRecipe, accuracy, train
from .dataset import FeatureDataset, Partition, partition
from .sampling import augment_task
from .stats import ClassStats, compute_base_stats
from .transforms import TransformChoice, apply_transform, choose_transform


@dataclass(frozen=True)
class EpisodeProtocol:
    """Task shape: N classes, K support and q query points per class."""

    way: int = 5
    shot: int = 1
    queries: int = 15

    def __post_init__(self) -> None:
        if self.way < 2 or self.shot < 1 or self.queries < 1:
            raise ValueError(f"invalid protocol {self}")


@dataclass(frozen=True, eq=False)
class Task:
    way: int
    shot: int
    queries_per_class: int
    support_x: np.ndarray  # (way*shot, d)
    support_y: np.ndarray
    query_x: np.ndarray    # (way*queries, d)
    query_y: np.ndarray
    task_seed: int


@dataclass(frozen=True)
class EpisodeResult:
    per_task: tuple[float, ...]
    mean: float
    ci95: float


def sample_task(part: Partition, way: int, shot: int, queries: int, task_seed: int) -> Task:
    """Uniformly choose N eligible classes, then K+q points per class
    without replacement; the first K of each class become support."""
    per_class = shot + queries
    eligible = [c for c in part.classes if part.points_of(c).shape[0] >= per_class]
    if len(eligible) < way:
        raise ValueError(
            f"split '{part.name}' has {len(eligible)} classes with >= {per_class} "
            f"points, need {way}"
        )
    rng = spawn_rng(TAG_TASK, task_seed)
    chosen = np.sort(rng.choice(np.array(eligible), size=way, replace=False))
    sup_x, sup_y, qry_x, qry_y = [], [], [], []
    for cid in chosen:
        pts = part.points_of(int(cid))
        idx = rng.choice(pts.shape[0], size=per_class, replace=False)
        sup_x.append(pts[idx[:shot]])
        qry_x.append(pts[idx[shot:]])
        sup_y.append(np.full(shot, cid, dtype=np.int64))
        qry_y.append(np.full(queries, cid, dtype=np.int64))
    return Task(
        way=way,
        shot=shot,
        queries_per_class=queries,
        support_x=np.vstack(sup_x),
        support_y=np.concatenate(sup_y),
        query_x=np.vstack(qry_x),
        query_y=np.concatenate(qry_y),
        task_seed=task_seed,
    )


def run_episode(
    task: Task,
    base_stats: list[ClassStats],
    config: GdcConfig,
    transform: TransformChoice,
    workers: int = 1,
) -> float:
    """Transform, calibrate and augment the support set, train, score."""
    sup = apply_transform(task.support_x, transform)
    qry = apply_transform(task.query_x, transform)
    aug = augment_task(
        sup, task.support_y, base_stats, config, task_key=task.task_seed, workers=workers
    )
    recipe = TrainRecipe(shuffle_seed=derive_seed(TAG_TRAIN, config.seed, task.task_seed))
    model = train(aug, recipe)
    return accuracy(model, qry, task.query_y)


def prepare_base_stats(
    dataset: FeatureDataset, config: GdcConfig
) -> tuple[TransformChoice, list[ClassStats]]:
    """Transform selection over the whole dataset, then base-class moments
    on the transformed features."""
    choice = choose_transform(dataset, config.beta)
    transformed = apply_transform(dataset, choice)
    return choice, compute_base_stats(partition(transformed, "base"))


def task_seed_for(base_seed: int, index: int) -> int:
    return derive_seed(TAG_TASK, base_seed, index)


# -- worker-pool plumbing ----------------------------------------------------

_CTX: dict = {}


def _pool_init(part, base_stats, config, choice, protocol):
    _CTX["args"] = (part, base_stats, config, choice, protocol)


def _pool_run(task_seed: int) -> float:
    part, base_stats, config, choice, protocol = _CTX["args"]
    task = sample_task(part, protocol.way, protocol.shot, protocol.queries, task_seed)
    return run_episode(task, base_stats, config, choice)


def run_tasks(
    part: Partition,
    base_stats: list[ClassStats],
    config: GdcConfig,
    protocol: EpisodeProtocol,
    task_seeds: list[int],
    choice: TransformChoice,
    workers: int = 1,
) -> list[float]:
    """Accuracies for the given task seeds, schedule-independent."""
    if workers > 1 and len(task_seeds) > 1:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_pool_init,
            initargs=(part, base_stats, config, choice, protocol),
        ) as pool:
            chunk = max(1, len(task_seeds) // (4 * workers))
            return list(pool.map(_pool_run, task_seeds, chunksize=chunk))
    _pool_init(part, base_stats, config, choice, protocol)
    return [_pool_run(s) for s in task_seeds]


def summarize(per_task: list[float]) -> EpisodeResult:
    accs = np.asarray(per_task, dtype=np.float64)
    mean = float(accs.mean())
    ci95 = 1.96 * float(accs.std(ddof=1)) / np.sqrt(len(accs)) if len(accs) > 1 else 0.0
    return EpisodeResult(per_task=tuple(float(a) for a in accs), mean=mean, ci95=float(ci95))


def evaluate(
    dataset: FeatureDataset,
    split_name: str,
    config: GdcConfig,
    protocol: EpisodeProtocol,
    num_tasks: int,
    base_seed: int,
    workers: int = 1,
) -> EpisodeResult:
    """Run ``num_tasks`` episodes on the named split and aggregate."""
    if num_tasks < 1:
        raise ValueError(f"num_tasks must be >= 1, got {num_tasks}")
    choice, base_stats = prepare_base_stats(dataset, config)
    part = partition(dataset, split_name)
    seeds = [task_seed_for(base_seed, i) for i in range(num_tasks)]
    accs = run_tasks(part, base_stats, config, protocol, seeds, choice, workers=workers)
    return summarize(accs)
