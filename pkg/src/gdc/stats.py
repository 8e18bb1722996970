"""Per-class Gaussian moments and support-to-class distances.

Base-class statistics are computed on transformed features so that they
live in the same space as transformed support points.  Three distance
metrics are provided; squared Euclidean is the default and the only one
whose scale is further shaped by the weight-decay exponent downstream.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dataset import Partition

STATS_MAGIC = b"GDCS"
STATS_VERSION = 1
_STATS_HEADER = struct.Struct("<4sIIQ")

# diagonal loading applied once when a class covariance cannot be
# factorized for the Mahalanobis-with-logdet metric
_RIDGE = 1e-6


class MetricKind(str, Enum):
    SQUARED_EUCLIDEAN = "squared-euclidean"
    MAHALANOBIS_LOG = "mahalanobis-log"
    SQUARED_DELTA = "squared-delta"


@dataclass(frozen=True)
class DistanceMetric:
    kind: MetricKind = MetricKind.SQUARED_EUCLIDEAN
    delta: float = 1.0

    def __post_init__(self) -> None:
        if self.kind is MetricKind.SQUARED_DELTA and self.delta <= 0:
            raise ValueError(f"delta must be positive for the delta metric, got {self.delta}")


@dataclass(frozen=True, eq=False)
class ClassStats:
    """Mean, covariance and point count of one class."""

    class_id: int
    mu: np.ndarray      # (d,)
    sigma: np.ndarray   # (d, d), symmetric
    count: int


def compute_base_stats(part: Partition) -> list[ClassStats]:
    """Per-class mean and unbiased covariance, ascending class_id.

    A single-point class gets the zero covariance matrix.
    """
    out = []
    for cid in part.classes:
        pts = np.asarray(part.points_of(cid), dtype=np.float64)
        n, d = pts.shape
        mu = pts.mean(axis=0)
        if n >= 2:
            centered = pts - mu
            sigma = centered.T @ centered / (n - 1)
            sigma = (sigma + sigma.T) / 2.0
        else:
            sigma = np.zeros((d, d))
        out.append(ClassStats(class_id=int(cid), mu=mu, sigma=sigma, count=n))
    return out


def _spd_solve_parts(sigma: np.ndarray, class_id: int) -> tuple[np.ndarray, float]:
    """Cholesky factor and log-determinant, with one ridge-repair attempt."""
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        ridge = _RIDGE * float(np.mean(np.diag(sigma)))
        try:
            chol = np.linalg.cholesky(sigma + ridge * np.eye(sigma.shape[0]))
        except np.linalg.LinAlgError:
            raise RuntimeError(
                f"covariance of class {class_id} is singular even after ridge repair"
            ) from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return chol, logdet


def distance(x_tilde: np.ndarray, stats: ClassStats, metric: DistanceMetric) -> float:
    """Distance from a transformed support point to one class distribution."""
    x = np.asarray(x_tilde, dtype=np.float64)
    if x.shape != stats.mu.shape:
        raise ValueError(f"point has dimension {x.shape[0]}, class stats have {stats.mu.shape[0]}")
    if metric.kind is MetricKind.SQUARED_EUCLIDEAN:
        diff = x - stats.mu
        return float(diff @ diff)
    if metric.kind is MetricKind.SQUARED_DELTA:
        diff = x - metric.delta * stats.mu
        return float(diff @ diff)
    chol, logdet = _spd_solve_parts(stats.sigma, stats.class_id)
    z = np.linalg.solve(chol, x - stats.mu)
    return float(logdet + z @ z)


def top_k(
    x_tilde: np.ndarray,
    all_stats: list[ClassStats],
    k: int,
    metric: DistanceMetric,
) -> list[tuple[ClassStats, float]]:
    """The k nearest classes, ascending distance, ties by ascending class_id."""
    if not 1 <= k <= len(all_stats):
        raise ValueError(f"k={k} out of range for {len(all_stats)} base classes")
    scored = [(distance(x_tilde, s, metric), s.class_id, s) for s in all_stats]
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(s, d) for d, _, s in scored[:k]]


def write_stats_cache(stats_list: list[ClassStats], path: str | Path) -> None:
    """Binary cache: header as the feature format with magic GDCS, then per
    class [class_id u32][d x f64 mu][d(d+1)/2 x f64 lower-triangular sigma]."""
    if not stats_list:
        raise ValueError("refusing to write an empty stats cache")
    d = stats_list[0].mu.shape[0]
    tril = np.tril_indices(d)
    with Path(path).open("wb") as fh:
        fh.write(_STATS_HEADER.pack(STATS_MAGIC, STATS_VERSION, d, len(stats_list)))
        for s in stats_list:
            fh.write(struct.pack("<I", s.class_id))
            fh.write(np.asarray(s.mu, dtype="<f8").tobytes())
            fh.write(np.asarray(s.sigma, dtype="<f8")[tril].tobytes())


def read_stats_cache(path: str | Path) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Read back (class_id, mu, sigma) triples; counts are not stored."""
    data = Path(path).read_bytes()
    if len(data) < _STATS_HEADER.size:
        raise ValueError(f"{path}: truncated stats cache header")
    magic, version, d, count = _STATS_HEADER.unpack_from(data, 0)
    if magic != STATS_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {STATS_MAGIC!r}")
    if version != STATS_VERSION:
        raise ValueError(f"{path}: unsupported stats cache version {version}")
    tril = np.tril_indices(d)
    rec_size = 4 + 8 * d + 8 * (d * (d + 1) // 2)
    if len(data) != _STATS_HEADER.size + count * rec_size:
        raise ValueError(f"{path}: stats cache size does not match header")
    out = []
    off = _STATS_HEADER.size
    for _ in range(count):
        (cid,) = struct.unpack_from("<I", data, off)
        off += 4
        mu = np.frombuffer(data, dtype="<f8", count=d, offset=off).copy()
        off += 8 * d
        packed = np.frombuffer(data, dtype="<f8", count=d * (d + 1) // 2, offset=off)
        off += 8 * (d * (d + 1) // 2)
        sigma = np.zeros((d, d))
        sigma[tril] = packed
        sigma = sigma + np.tril(sigma, -1).T
        out.append((int(cid), mu, sigma))
    return out
