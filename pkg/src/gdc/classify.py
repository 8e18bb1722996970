"""Multinomial logistic regression trained with plain SGD.

The recipe is fixed: batch size 1024, 200 epochs, learning rate 0.08,
mean cross-entropy, no regularization, no schedule.  Weights start at
zero and the per-epoch shuffle is driven by a seeded stream, so training
is bit-deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import TAG_TRAIN, spawn_rng
from .sampling import AugmentedSet


class TrainingError(RuntimeError):
    """Raised when the loss leaves the finite range during training."""


@dataclass(frozen=True)
class TrainRecipe:
    batch_size: int = 1024
    epochs: int = 200
    learning_rate: float = 0.08
    shuffle_seed: int = 0


@dataclass(eq=False)
class LogRegModel:
    weights: np.ndarray  # (N, d)
    bias: np.ndarray     # (N,)
    classes: tuple[int, ...]  # ascending class_id; argmax ties go to the
                              # lowest position


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_and_grads(
    w: np.ndarray, b: np.ndarray, x: np.ndarray, y_idx: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its gradients for one batch."""
    n = x.shape[0]
    logits = x @ w.T + b
    log_probs = _log_softmax(logits)
    loss = -float(log_probs[np.arange(n), y_idx].mean())
    grad_logits = np.exp(log_probs)
    grad_logits[np.arange(n), y_idx] -= 1.0
    grad_logits /= n
    return loss, grad_logits.T @ x, grad_logits.sum(axis=0)


def train(data: AugmentedSet, recipe: TrainRecipe) -> LogRegModel:
    """SGD over epochs x ceil(n/batch) steps; the last partial batch is kept."""
    x = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.class_ids)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ValueError(f"training needs at least 2 classes, got {len(classes)}")
    if not np.isfinite(x).all():
        raise ValueError("training features contain non-finite values")
    y_idx = np.searchsorted(np.array(classes), y)
    n, d = x.shape
    w = np.zeros((len(classes), d))
    b = np.zeros(len(classes))
    rng = spawn_rng(TAG_TRAIN, recipe.shuffle_seed)
    for epoch in range(recipe.epochs):
        perm = rng.permutation(n)
        for step, start in enumerate(range(0, n, recipe.batch_size)):
            batch = perm[start : start + recipe.batch_size]
            loss, grad_w, grad_b = _loss_and_grads(w, b, x[batch], y_idx[batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            w -= recipe.learning_rate * grad_w
            b -= recipe.learning_rate * grad_b
    return LogRegModel(weights=w, bias=b, classes=classes)


def predict(model: LogRegModel, features: np.ndarray) -> tuple[int, np.ndarray]:
    """Softmax class probabilities for one point and the argmax class."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (model.weights.shape[1],):
        raise ValueError(
            f"feature vector has shape {x.shape}, model expects ({model.weights.shape[1]},)"
        )
    probs = np.exp(_log_softmax((model.weights @ x + model.bias)[None, :]))[0]
    return model.classes[int(np.argmax(probs))], probs


def accuracy(model: LogRegModel, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of points whose argmax class matches the label."""
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.shape[0] == 0:
        raise ValueError("query set is empty")
    logits = x @ model.weights.T + model.bias
    predicted = np.array(model.classes)[np.argmax(logits, axis=1)]
    return float((predicted == labels).mean())
