"""Report rendering: CSV summaries with matplotlib figures next to them.

Used by the CLI report paths; figures go to files only (Agg backend).
For augmented sets with more than two dimensions the scatter projects
onto the top two principal components of the dumped points.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .episodes import EpisodeResult
from .sampling import ORIGIN_SUPPORT, AugmentedSet


def write_accuracy_report(result: EpisodeResult, out_dir: str | Path) -> list[Path]:
    """Per-task accuracy CSV plus a histogram figure with the mean and its
    95% interval marked."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "per_task_accuracy.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_index", "accuracy"])
        for i, acc in enumerate(result.per_task):
            writer.writerow([i, f"{acc:.10g}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(result.per_task, bins=min(30, max(5, len(result.per_task) // 10)), color="#4878d0")
    ax.axvline(result.mean, color="k", lw=1.5, label=f"mean = {100 * result.mean:.2f}%")
    ax.axvspan(
        result.mean - result.ci95,
        result.mean + result.ci95,
        color="k",
        alpha=0.15,
        label=f"95% CI half-width = {100 * result.ci95:.2f}",
    )
    ax.set_xlabel("per-task accuracy")
    ax.set_ylabel("tasks")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig_path = out_dir / "accuracy_histogram.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]


def _project_2d(features: np.ndarray) -> np.ndarray:
    if features.shape[1] <= 2:
        out = np.zeros((features.shape[0], 2))
        out[:, : features.shape[1]] = features
        return out
    centered = features - features.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:2].T


def write_samples_report(aug: AugmentedSet, out_dir: str | Path) -> list[Path]:
    """Projected-coordinates CSV plus a scatter of sampled points (faint)
    with their generating support points (ringed crosses)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coords = _project_2d(aug.features)
    csv_path = out_dir / "samples_projected.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_id", "origin", "c0", "c1"])
        for cid, origin, (c0, c1) in zip(aug.class_ids, aug.origins, coords):
            writer.writerow([int(cid), int(origin), f"{c0:.10g}", f"{c1:.10g}"])

    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = plt.get_cmap("tab10")
    classes = sorted(int(c) for c in np.unique(aug.class_ids))
    for pos, cid in enumerate(classes):
        color = cmap(pos % 10)
        cls = aug.class_ids == cid
        sampled = cls & (aug.origins != ORIGIN_SUPPORT)
        support = cls & (aug.origins == ORIGIN_SUPPORT)
        ax.scatter(coords[sampled, 0], coords[sampled, 1], s=8, alpha=0.25, color=color)
        ax.scatter(
            coords[support, 0],
            coords[support, 1],
            marker="P",
            s=90,
            color=color,
            edgecolors="k",
            linewidths=1.0,
            label=f"class {cid}",
        )
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig_path = out_dir / "samples_scatter.png"
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [csv_path, fig_path]
