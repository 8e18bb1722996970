"""Synthetic point generation from calibrated Gaussians.

Draws use the factorization x = mu + L z with L L^T = Sigma and z standard
normal.  Every support point owns a counter-based Philox stream keyed by
(seed, task key, support index), so per-point sampling is schedule- and
worker-count-independent bit for bit.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._rng import TAG_SAMPLE, spawn_rng
from .calibrate import GdcConfig, calibrate_support_point
from .dataset import MAGIC, VERSION, DatasetError
from .stats import ClassStats

ORIGIN_SUPPORT = 0
ORIGIN_SAMPLED = 1

_DUMP_HEADER = struct.Struct("<4sIIQ")

# jitter ladder for covariances that lost positive definiteness to round-off
_JITTER_START = 1e-8
_JITTER_LIMIT = 1e-2


@dataclass(frozen=True, eq=False)
class AugmentedSet:
    """Support points plus their sampled companions, in deterministic order:
    all support points first (input order), then each point's samples."""

    dim: int
    features: np.ndarray   # (n, dim) float64
    class_ids: np.ndarray  # (n,) int64
    origins: np.ndarray    # (n,) uint8, ORIGIN_SUPPORT or ORIGIN_SAMPLED

    @property
    def num_points(self) -> int:
        return int(self.class_ids.shape[0])


def robust_cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, repairing borderline matrices.

    The all-zero matrix factors to zero (degenerate Gaussian).  Otherwise a
    failed factorization is retried with eps * mean-diagonal jitter, eps
    rising tenfold from 1e-8 to 1e-2 before giving up.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    if not sigma.any():
        return np.zeros_like(sigma)
    scale = float(np.mean(np.diag(sigma)))
    eye = np.eye(sigma.shape[0])
    eps = _JITTER_START
    while eps <= _JITTER_LIMIT:
        try:
            return np.linalg.cholesky(sigma + eps * scale * eye)
        except np.linalg.LinAlgError:
            eps *= 10.0
    min_eig = float(np.linalg.eigvalsh(sigma).min())
    raise RuntimeError(
        f"covariance factorization failed after jitter repair up to "
        f"{_JITTER_LIMIT:g}; smallest eigenvalue is about {min_eig:.3e}"
    )


def sample_mvn(mu: np.ndarray, sigma: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. Gaussian draws as rows, deterministic given the stream."""
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    mu = np.asarray(mu, dtype=np.float64)
    chol = robust_cholesky(sigma)
    z = rng.standard_normal((n, mu.shape[0]))
    return mu + z @ chol.T


def _sample_for_support_point(
    support_x: np.ndarray,
    support_y: np.ndarray,
    base_stats: list[ClassStats],
    config: GdcConfig,
    task_key: int,
    index: int,
) -> np.ndarray:
    calib = calibrate_support_point(support_x[index], base_stats, config, support_index=index)
    rng = spawn_rng(TAG_SAMPLE, config.seed, task_key, index)
    return sample_mvn(calib.mu_prime, calib.sigma_prime_s, config.n_samples, rng)


def augment_task(
    support_x: np.ndarray,
    support_y: np.ndarray,
    base_stats: list[ClassStats],
    config: GdcConfig,
    task_key: int = 0,
    workers: int = 1,
) -> AugmentedSet:
    """Calibrate every support point and draw ``config.n_samples`` labeled
    points from each calibrated Gaussian; the union keeps the originals."""
    support_x = np.asarray(support_x, dtype=np.float64)
    support_y = np.asarray(support_y, dtype=np.int64)
    num_support, dim = support_x.shape
    indices = range(num_support)
    if config.n_samples == 0:
        sampled = [np.empty((0, dim)) for _ in indices]
    elif workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sampled = list(
                pool.map(
                    lambda i: _sample_for_support_point(
                        support_x, support_y, base_stats, config, task_key, i
                    ),
                    indices,
                )
            )
    else:
        sampled = [
            _sample_for_support_point(support_x, support_y, base_stats, config, task_key, i)
            for i in indices
        ]
    features = np.vstack([support_x] + sampled)
    class_ids = np.concatenate(
        [support_y, np.repeat(support_y, [s.shape[0] for s in sampled])]
    )
    origins = np.concatenate(
        [
            np.full(num_support, ORIGIN_SUPPORT, dtype=np.uint8),
            np.full(features.shape[0] - num_support, ORIGIN_SAMPLED, dtype=np.uint8),
        ]
    )
    return AugmentedSet(dim=dim, features=features, class_ids=class_ids, origins=origins)


def write_augmented(aug: AugmentedSet, path: str | Path) -> None:
    """Feature-format dump with a trailing origin byte per record
    (0 = support, 1 = sampled); features downcast to f32."""
    if aug.num_points == 0:
        raise DatasetError("refusing to write an empty augmented set")
    record = np.dtype([("class_id", "<u4"), ("features", "<f4", (aug.dim,)), ("origin", "u1")])
    out = np.empty(aug.num_points, dtype=record)
    out["class_id"] = aug.class_ids.astype(np.uint32)
    out["features"] = aug.features.astype(np.float32)
    out["origin"] = aug.origins
    with Path(path).open("wb") as fh:
        fh.write(_DUMP_HEADER.pack(MAGIC, VERSION, aug.dim, aug.num_points))
        fh.write(out.tobytes())


def read_augmented(path: str | Path) -> AugmentedSet:
    data = Path(path).read_bytes()
    if len(data) < _DUMP_HEADER.size:
        raise DatasetError(f"{path}: truncated dump header")
    magic, version, dim, count = _DUMP_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetError(f"{path}: unsupported dump version {version}")
    record = np.dtype([("class_id", "<u4"), ("features", "<f4", (dim,)), ("origin", "u1")])
    if len(data) != _DUMP_HEADER.size + count * record.itemsize:
        raise DatasetError(f"{path}: dump size does not match header")
    records = np.frombuffer(data, dtype=record, count=count, offset=_DUMP_HEADER.size)
    return AugmentedSet(
        dim=int(dim),
        features=records["features"].astype(np.float64).reshape(count, dim),
        class_ids=records["class_id"].astype(np.int64),
        origins=records["origin"].copy(),
    )
