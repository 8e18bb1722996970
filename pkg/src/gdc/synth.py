"""Synthetic Gaussian worlds with known ground truth.

Base classes get random means and a covariance from the chosen family;
each held-out (validation/novel) class copies the covariance of a parent
base class and sits at a mean offset proportional to that parent's
covariance scale.  The generator returns the true per-class moments
alongside the sampled dataset so calibration quality is measurable, and
a closed-form Gaussian KL divergence serves as the quality oracle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from ._rng import TAG_SYNTH, spawn_rng
from .dataset import FeatureDataset, SplitManifest

# base means are drawn standard normal times this spread; covariance traces
# are kept near 1 so squared support-to-class distances land at O(1), the
# regime where decayed inverse-distance weights are informative
_MEAN_SPREAD = 0.18


class CovarianceFamily(str, Enum):
    SPHERICAL = "spherical"
    DIAGONAL = "diagonal"
    RANDOM_SPD = "random-spd"


@dataclass(frozen=True)
class SynthSpec:
    dim: int
    num_base: int
    num_validation: int
    num_novel: int
    points_per_class: int
    novel_offset_scale: float = 0.5
    covariance_family: CovarianceFamily = CovarianceFamily.SPHERICAL
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("dim", "num_base", "num_validation", "num_novel", "points_per_class"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.novel_offset_scale < 0:
            raise ValueError("novel_offset_scale must be >= 0")


def _draw_covariance(family: CovarianceFamily, d: int, rng: np.random.Generator) -> np.ndarray:
    if family is CovarianceFamily.SPHERICAL:
        return float(rng.uniform(0.5, 1.5)) / d * np.eye(d)
    if family is CovarianceFamily.DIAGONAL:
        return np.diag(rng.uniform(0.5, 1.5, size=d) / d)
    a = rng.standard_normal((d, d))
    return (a @ a.T / d + 0.1 * np.eye(d)) / d


def _offset_means(
    parents: np.ndarray,
    base_mus: np.ndarray,
    base_sigmas: list[np.ndarray],
    scale: float,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    mus, sigmas = [], []
    for p in parents:
        sigma = base_sigmas[int(p)]
        direction = rng.standard_normal(base_mus.shape[1])
        direction /= np.linalg.norm(direction)
        step = scale * np.sqrt(float(np.mean(np.diag(sigma))))
        mus.append(base_mus[int(p)] + step * direction)
        sigmas.append(sigma)
    return mus, sigmas


def generate(spec: SynthSpec) -> tuple[FeatureDataset, dict[int, tuple[np.ndarray, np.ndarray]]]:
    """Sample the world; returns (dataset, {class_id: (true mu, true sigma)})."""
    rng = spawn_rng(TAG_SYNTH, spec.seed)
    d = spec.dim
    base_mus = rng.standard_normal((spec.num_base, d)) * _MEAN_SPREAD
    base_sigmas = [_draw_covariance(spec.covariance_family, d, rng) for _ in range(spec.num_base)]

    def pick_parents(count: int) -> np.ndarray:
        replace = count > spec.num_base
        return rng.choice(spec.num_base, size=count, replace=replace)

    val_mus, val_sigmas = _offset_means(
        pick_parents(spec.num_validation), base_mus, base_sigmas, spec.novel_offset_scale, rng
    )
    nov_mus, nov_sigmas = _offset_means(
        pick_parents(spec.num_novel), base_mus, base_sigmas, spec.novel_offset_scale, rng
    )

    all_mus = list(base_mus) + val_mus + nov_mus
    all_sigmas = base_sigmas + val_sigmas + nov_sigmas
    ids, feats, truth = [], [], {}
    for cid, (mu, sigma) in enumerate(zip(all_mus, all_sigmas)):
        pts = rng.multivariate_normal(mu, sigma, size=spec.points_per_class)
        ids.append(np.full(spec.points_per_class, cid, dtype=np.int64))
        feats.append(pts.astype(np.float32))
        truth[cid] = (np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64))

    nb, nv = spec.num_base, spec.num_validation
    split = SplitManifest(
        base=frozenset(range(nb)),
        validation=frozenset(range(nb, nb + nv)),
        novel=frozenset(range(nb + nv, nb + nv + spec.num_novel)),
    )
    dataset = FeatureDataset(
        dim=d,
        class_ids=np.concatenate(ids),
        features=np.vstack(feats),
        split=split,
    )
    return dataset, truth


def kl_gaussian(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    """KL(N(mu1, sigma1) || N(mu2, sigma2)), closed form; sigma2 must be
    invertible."""
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    s1 = np.asarray(sigma1, dtype=np.float64)
    s2 = np.asarray(sigma2, dtype=np.float64)
    d = mu1.shape[0]
    try:
        chol2 = np.linalg.cholesky(s2)
    except np.linalg.LinAlgError:
        raise ValueError("reference covariance is singular") from None
    logdet2 = 2.0 * float(np.sum(np.log(np.diag(chol2))))
    sign1, logdet1 = np.linalg.slogdet(s1)
    if sign1 <= 0:
        return float("inf")
    trace = float(np.trace(np.linalg.solve(s2, s1)))
    diff = np.linalg.solve(chol2, mu2 - mu1)
    quad = float(diff @ diff)
    return 0.5 * (trace + quad - d + logdet2 - float(logdet1))


def write_ground_truth(truth: dict[int, tuple[np.ndarray, np.ndarray]], path: str | Path) -> None:
    doc = {
        str(cid): {"mu": mu.tolist(), "sigma": sigma.tolist()}
        for cid, (mu, sigma) in sorted(truth.items())
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def read_ground_truth(path: str | Path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        int(cid): (np.array(v["mu"], dtype=np.float64), np.array(v["sigma"], dtype=np.float64))
        for cid, v in doc.items()
    }
