"""Gaussianization of features via power transforms.

Two elementwise families are supported: the power ladder ``x**beta``
(log at beta=0), valid only for non-negative inputs, and the four-branch
signed power transform defined for all reals.  ``select_transform``
picks between them with a single scan of the dataset: the power ladder
iff no feature value anywhere is negative.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import FeatureDataset

# relu feature matrices contain exact zeros; log(0) is substituted with
# log of this offset so beta=0 stays usable on them
_LOG_ZERO = 1e-12


class TransformKind(str, Enum):
    TUKEY = "tukey"
    YEO_JOHNSON = "yeo-johnson"


@dataclass(frozen=True)
class TransformChoice:
    kind: TransformKind
    beta: float


def select_transform(dataset: FeatureDataset) -> TransformKind:
    """Power ladder iff every feature value in every split is >= 0."""
    if dataset.features.size == 0:
        raise ValueError("cannot select a transform for an empty dataset")
    if float(dataset.features.min()) >= 0.0:
        return TransformKind.TUKEY
    return TransformKind.YEO_JOHNSON


def choose_transform(dataset: FeatureDataset, beta: float) -> TransformChoice:
    return TransformChoice(select_transform(dataset), beta)


def tukey(x: np.ndarray, beta: float) -> np.ndarray:
    """Elementwise x**beta (log x at beta=0); input must be non-negative."""
    x = np.asarray(x, dtype=np.float64)
    neg = x < 0
    if neg.any():
        idx = int(np.flatnonzero(neg.ravel())[0])
        raise ValueError(
            f"power-ladder transform requires non-negative inputs; "
            f"component {idx} is {x.ravel()[idx]:g}"
        )
    if beta == 0.0:
        return np.log(np.where(x == 0.0, _LOG_ZERO, x))
    return np.power(x, beta)


def yeo_johnson(x: np.ndarray, beta: float) -> np.ndarray:
    """Four-branch signed power transform, defined for all reals.

    x >= 0: ((x+1)**beta - 1)/beta, or log(x+1) at beta=0.
    x <  0: -(((-x+1)**(2-beta)) - 1)/(2-beta), or -log(-x+1) at beta=2.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    neg = ~pos
    if beta == 0.0:
        out[pos] = np.log1p(x[pos])
    else:
        out[pos] = (np.power(x[pos] + 1.0, beta) - 1.0) / beta
    if beta == 2.0:
        out[neg] = -np.log1p(-x[neg])
    else:
        out[neg] = -(np.power(1.0 - x[neg], 2.0 - beta) - 1.0) / (2.0 - beta)
    return out


def apply_transform(data: np.ndarray | FeatureDataset, choice: TransformChoice):
    """Apply the chosen transform elementwise, preserving shape."""
    if isinstance(data, FeatureDataset):
        return data.with_features(apply_transform(data.features, choice))
    if choice.kind is TransformKind.TUKEY:
        return tukey(data, choice.beta)
    return yeo_johnson(data, choice.beta)
