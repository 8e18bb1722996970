"""Command-line entry point.

Commands: evaluate, tune, gen-synth, stats, dump-samples.  Validation
problems exit 1, pipeline runtime failures exit 2, and exit 0 means the
result file was written.  GDC_WORKERS overrides --workers.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .calibrate import CovMode, GdcConfig
from .dataset import load_features, partition, write_features, write_manifest
from .episodes import EpisodeProtocol, evaluate, prepare_base_stats, sample_task
from .sampling import augment_task, write_augmented
from .search import confirm_top, dogs_space, mini_cub_space, tune
from .stats import DistanceMetric, MetricKind, compute_base_stats, write_stats_cache
from .synth import CovarianceFamily, SynthSpec, generate, write_ground_truth
from .transforms import apply_transform, choose_transform


@dataclass(frozen=True)
class RunManifest:
    """Everything one evaluation run depends on."""

    config: GdcConfig
    features_path: Path
    manifest_path: Path
    split: str
    num_tasks: int
    base_seed: int
    output_path: Path

    def __post_init__(self) -> None:
        for path in (self.features_path, self.manifest_path):
            if not path.exists():
                raise FileNotFoundError(f"input file not found: {path}")


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", required=True, help="feature file (.gdcf binary or .csv)")
    p.add_argument("--manifest", required=True, help="split manifest JSON")
    p.add_argument("--format", choices=["binary", "csv"], default="binary")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=1.0, help="transform exponent")
    p.add_argument("--m", type=float, default=1.0, help="weight decay exponent")
    p.add_argument("--k", type=int, default=2, help="number of nearest base classes")
    p.add_argument("--alpha1", type=float, default=0.0, help="diagonal shrinkage strength")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha2", type=float, default=None, help="off-diagonal shrinkage strength")
    group.add_argument(
        "--alpha2-mult", type=float, default=None, help="off-diagonal strength as a multiple of alpha1"
    )
    p.add_argument("--n", type=int, default=750, help="samples per support point")
    p.add_argument(
        "--metric",
        choices=[m.value for m in MetricKind],
        default=MetricKind.SQUARED_EUCLIDEAN.value,
    )
    p.add_argument("--delta", type=float, default=1.0, help="delta for the squared-delta metric")
    p.add_argument(
        "--cov-mode", choices=[c.value for c in CovMode], default=CovMode.WEIGHTED_AVERAGE.value
    )
    p.add_argument("--seed", type=int, default=0, help="pipeline random seed")


def _add_protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--way", type=int, default=5)
    p.add_argument("--shot", type=int, default=1)
    p.add_argument("--queries", type=int, default=15, help="query points per class")


def _config_from_args(args: argparse.Namespace) -> GdcConfig:
    if args.alpha2 is not None:
        alpha2 = args.alpha2
    elif args.alpha2_mult is not None:
        alpha2 = args.alpha2_mult * args.alpha1
    else:
        alpha2 = 0.0
    return GdcConfig(
        beta=args.beta,
        m=args.m,
        k=args.k,
        alpha1=args.alpha1,
        alpha2=alpha2,
        n_samples=args.n,
        metric=DistanceMetric(kind=MetricKind(args.metric), delta=args.delta),
        cov_mode=CovMode(args.cov_mode),
        seed=args.seed,
    )


def _workers(args: argparse.Namespace) -> int:
    env = os.environ.get("GDC_WORKERS")
    if env is not None:
        return max(1, int(env))
    if args.workers is not None:
        return max(1, args.workers)
    return os.cpu_count() or 1


def _print_result(mean: float, ci95: float) -> None:
    print(f"accuracy: {100 * mean:.2f} ± {100 * ci95:.2f} (%, 95% CI)")


def cmd_evaluate(args: argparse.Namespace) -> int:
    run = RunManifest(
        config=_config_from_args(args),
        features_path=Path(args.features),
        manifest_path=Path(args.manifest),
        split=args.split,
        num_tasks=args.tasks,
        base_seed=args.seed,
        output_path=Path(args.output),
    )
    dataset = load_features(run.features_path, run.manifest_path, args.format)
    protocol = EpisodeProtocol(way=args.way, shot=args.shot, queries=args.queries)
    result = evaluate(
        dataset, run.split, run.config, protocol, run.num_tasks, run.base_seed,
        workers=_workers(args),
    )
    doc = {
        "mean": result.mean,
        "ci95": result.ci95,
        "num_tasks": run.num_tasks,
        "config": {
            **run.config.to_dict(),
            "way": args.way,
            "shot": args.shot,
            "queries": args.queries,
            "split": run.split,
        },
    }
    if args.per_task:
        doc["per_task"] = list(result.per_task)
    run.output_path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    if args.report_dir:
        from .report import write_accuracy_report

        for path in write_accuracy_report(result, args.report_dir):
            print(f"report: {path}")
    _print_result(result.mean, result.ci95)
    print(f"result written to {args.output}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    dataset = load_features(args.features, args.manifest, args.format)
    num_base = len(dataset.split.base)
    space = mini_cub_space(num_base) if args.preset == "mini-cub" else dogs_space(num_base)
    protocol = EpisodeProtocol(way=args.way, shot=args.shot, queries=args.queries)
    records = tune(
        dataset,
        space,
        protocol,
        num_trials=args.trials,
        master_seed=args.seed,
        log_path=args.log,
        tasks_per_trial=args.tasks_per_trial,
        prune_after=args.prune_after,
        workers=_workers(args),
    )
    candidates = confirm_top(
        dataset,
        records,
        protocol,
        top_n=args.top,
        novel_tasks=args.novel_tasks,
        base_seed=args.seed,
        workers=_workers(args),
    )
    doc = {
        "trials": len(records),
        "pruned": sum(1 for r in records if r.status.value == "pruned"),
        "failed": sum(1 for r in records if r.status.value == "failed"),
        "candidates": [
            {
                "trial_index": c.trial_index,
                "config": c.config.to_dict(),
                "validation_mean": c.validation_mean,
                "novel_mean": c.novel.mean,
                "novel_ci95": c.novel.ci95,
            }
            for c in candidates
        ],
    }
    Path(args.output).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    best = candidates[0]
    print(f"best of {len(records)} trials (trial {best.trial_index}):")
    _print_result(best.novel.mean, best.novel.ci95)
    print(f"result written to {args.output}")
    return 0


def cmd_gen_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        dim=args.dim,
        num_base=args.base,
        num_validation=args.validation,
        num_novel=args.novel,
        points_per_class=args.points,
        novel_offset_scale=args.offset_scale,
        covariance_family=CovarianceFamily(args.family),
        seed=args.seed,
    )
    dataset, truth = generate(spec)
    prefix = Path(args.output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    features_path = Path(str(prefix) + ".gdcf")
    manifest_path = Path(str(prefix) + ".manifest.json")
    truth_path = Path(str(prefix) + ".truth.json")
    write_features(dataset, features_path)
    write_manifest(dataset.split, manifest_path)
    write_ground_truth(truth, truth_path)
    print(f"wrote {features_path}, {manifest_path}, {truth_path}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = load_features(args.features, args.manifest, args.format)
    choice = choose_transform(dataset, args.beta)
    transformed = apply_transform(dataset, choice)
    stats = compute_base_stats(partition(transformed, args.split))
    write_stats_cache(stats, args.output)
    print(
        f"{len(stats)} classes from split '{args.split}' "
        f"({choice.kind.value}, beta={choice.beta:g}) -> {args.output}"
    )
    return 0


def cmd_dump_samples(args: argparse.Namespace) -> int:
    dataset = load_features(args.features, args.manifest, args.format)
    config = _config_from_args(args)
    protocol = EpisodeProtocol(way=args.way, shot=args.shot, queries=args.queries)
    choice, base_stats = prepare_base_stats(dataset, config)
    part = partition(dataset, args.split)
    task = sample_task(part, protocol.way, protocol.shot, protocol.queries, args.task_seed)
    support = apply_transform(task.support_x, choice)
    aug = augment_task(
        support, task.support_y, base_stats, config, task_key=task.task_seed,
        workers=_workers(args),
    )
    write_augmented(aug, args.output)
    if args.report_dir:
        from .report import write_samples_report

        for path in write_samples_report(aug, args.report_dir):
            print(f"report: {path}")
    print(f"{aug.num_points} points ({task.way}-way {task.shot}-shot) written to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdc",
        description="Distribution calibration and episodic evaluation for few-shot classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="run N-way K-shot episodes and report accuracy")
    _add_dataset_args(p)
    p.add_argument("--split", choices=["base", "validation", "novel"], default="novel")
    _add_protocol_args(p)
    p.add_argument("--tasks", type=int, required=True, help="number of episodes")
    _add_config_args(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--per-task", action="store_true", help="include per-task accuracies in JSON")
    p.add_argument("--output", default="result.json")
    p.add_argument("--report-dir", default=None, help="also render CSV + figure report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="random-grid hyperparameter search with median pruning")
    _add_dataset_args(p)
    _add_protocol_args(p)
    p.add_argument("--preset", choices=["mini-cub", "dogs"], default="mini-cub")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="master search seed")
    p.add_argument("--tasks-per-trial", type=int, default=200)
    p.add_argument("--prune-after", type=int, default=100)
    p.add_argument("--top", type=int, default=3, help="candidates confirmed on the novel split")
    p.add_argument("--novel-tasks", type=int, default=5000)
    p.add_argument("--log", required=True, help="append-only JSONL trial log (resumable)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", default="tune_result.json")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("gen-synth", help="generate a synthetic Gaussian world")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--base", type=int, required=True)
    p.add_argument("--validation", type=int, required=True)
    p.add_argument("--novel", type=int, required=True)
    p.add_argument("--points", type=int, required=True, help="points per class")
    p.add_argument("--offset-scale", type=float, default=0.5)
    p.add_argument("--family", choices=[f.value for f in CovarianceFamily], default="spherical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--output-prefix",
        required=True,
        help="writes PREFIX.gdcf, PREFIX.manifest.json, PREFIX.truth.json",
    )
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("stats", help="dump per-class moments to a binary cache")
    _add_dataset_args(p)
    p.add_argument("--split", choices=["base", "validation", "novel"], default="base")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--output", default="stats.gdcs")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("dump-samples", help="calibrate one task and dump its augmented set")
    _add_dataset_args(p)
    p.add_argument("--split", choices=["base", "validation", "novel"], default="novel")
    _add_protocol_args(p)
    p.add_argument("--task-seed", type=int, default=0)
    _add_config_args(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", default="samples.gdcf")
    p.add_argument("--report-dir", default=None, help="also render CSV + scatter report here")
    p.set_defaults(func=cmd_dump_samples)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
