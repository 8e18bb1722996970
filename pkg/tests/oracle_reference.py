"""Independent brute-force implementations of the calibration pipeline.

Everything here is deliberately written against different primitives than
the package: moments via np.mean/np.cov, distances via scipy's cdist,
top-k via full argsort, Gaussian draws via numpy's SVD-based
multivariate_normal, and the classifier via L-BFGS on the convex
cross-entropy objective.  Running this file prints the reference margin
and KL win rate for the synthetic end-to-end criteria; those numbers are
frozen into test_acceptance.py.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from gdc.dataset import partition
from gdc.synth import SynthSpec, generate, kl_gaussian

WORLD_SPEC = SynthSpec(
    dim=16,
    num_base=20,
    num_validation=5,
    num_novel=5,
    points_per_class=200,
    novel_offset_scale=0.5,
    seed=7,
)
LIGHT_GRID = [
    {"m": m, "k": k, "alpha1": a1}
    for m in (0.5, 1.0, 2.0)
    for k in (2, 4, 8)
    for a1 in (0.0, 1.0)
]
KL_CONFIG = {"m": 1.0, "k": 2, "alpha1": 0.0}


def oracle_stats(part):
    mus, sigmas = [], []
    for cid in part.classes:
        pts = part.points_of(cid).astype(np.float64)
        mus.append(np.mean(pts, axis=0))
        sigmas.append(np.cov(pts, rowvar=False))
    return np.array(mus), np.array(sigmas)


def oracle_calibrate(x, mus, sigmas, m, k, alpha1, alpha2=0.0):
    d2 = cdist(x[None, :], mus, metric="sqeuclidean")[0]
    order = np.argsort(d2, kind="stable")[:k]
    w = np.array([1.0 / (1.0 + d2[i] ** m) for i in order])
    mu_prime = (x + sum(wi * mus[i] for wi, i in zip(w, order))) / (1.0 + w.sum())
    sigma_prime = sum(wi * sigmas[i] for wi, i in zip(w, order)) / w.sum()
    dim = x.shape[0]
    s1 = np.mean(np.diag(sigma_prime))
    off = sigma_prime.sum() - np.trace(sigma_prime)
    s2 = off / (dim * dim - dim) if dim > 1 else 0.0
    shrunk = sigma_prime + alpha1 * s1 * np.eye(dim) + alpha2 * s2 * (np.ones((dim, dim)) - np.eye(dim))
    return mu_prime, shrunk


def oracle_logreg_accuracy(train_x, train_y, query_x, query_y):
    classes = np.unique(train_y)
    n_cls, dim = len(classes), train_x.shape[1]
    y_idx = np.searchsorted(classes, train_y)
    onehot = np.eye(n_cls)[y_idx]

    def objective(theta):
        w = theta[: n_cls * dim].reshape(n_cls, dim)
        b = theta[n_cls * dim :]
        logits = train_x @ w.T + b
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1))
        loss = float(np.mean(log_z - shifted[np.arange(len(y_idx)), y_idx]))
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        grad_logits = (probs - onehot) / len(y_idx)
        grad = np.concatenate([(grad_logits.T @ train_x).ravel(), grad_logits.sum(axis=0)])
        return loss, grad

    res = minimize(objective, np.zeros(n_cls * dim + n_cls), jac=True, method="L-BFGS-B")
    w = res.x[: n_cls * dim].reshape(n_cls, dim)
    b = res.x[n_cls * dim :]
    preds = classes[np.argmax(query_x @ w.T + b, axis=1)]
    return float(np.mean(preds == query_y))


def oracle_sample_task(part, way, shot, queries, rng):
    chosen = np.sort(rng.choice(np.array(part.classes), size=way, replace=False))
    sup_x, sup_y, qry_x, qry_y = [], [], [], []
    for cid in chosen:
        pts = part.points_of(int(cid))
        idx = rng.choice(pts.shape[0], size=shot + queries, replace=False)
        sup_x.append(pts[idx[:shot]])
        qry_x.append(pts[idx[shot:]])
        sup_y += [cid] * shot
        qry_y += [cid] * queries
    return (
        np.vstack(sup_x).astype(np.float64),
        np.array(sup_y),
        np.vstack(qry_x).astype(np.float64),
        np.array(qry_y),
    )


def oracle_episode(part, mus, sigmas, params, n_samples, way, shot, queries, rng):
    sup_x, sup_y, qry_x, qry_y = oracle_sample_task(part, way, shot, queries, rng)
    train_x, train_y = [sup_x], [sup_y]
    if n_samples > 0:
        for x, y in zip(sup_x, sup_y):
            mu, sigma = oracle_calibrate(x, mus, sigmas, **params)
            train_x.append(rng.multivariate_normal(mu, sigma, size=n_samples))
            train_y.append(np.full(n_samples, y))
    return oracle_logreg_accuracy(
        np.vstack(train_x), np.concatenate(train_y), qry_x, qry_y
    )


def oracle_margin(novel_tasks=500, tune_tasks=100, n_samples=200):
    """Criterion: lightly tuned calibration vs the support-only baseline."""
    ds, _ = generate(WORLD_SPEC)
    mus, sigmas = oracle_stats(partition(ds, "base"))
    val = partition(ds, "validation")
    novel = partition(ds, "novel")

    best, best_mean = None, -1.0
    for params in LIGHT_GRID:
        rng = np.random.default_rng(101)
        accs = [
            oracle_episode(val, mus, sigmas, params, n_samples, 5, 1, 15, rng)
            for _ in range(tune_tasks)
        ]
        if np.mean(accs) > best_mean:
            best, best_mean = params, float(np.mean(accs))

    rng = np.random.default_rng(202)
    gdc_accs = [
        oracle_episode(novel, mus, sigmas, best, n_samples, 5, 1, 15, rng)
        for _ in range(novel_tasks)
    ]
    rng = np.random.default_rng(202)
    base_accs = [
        oracle_episode(novel, mus, sigmas, best, 0, 5, 1, 15, rng)
        for _ in range(novel_tasks)
    ]
    return {
        "best_params": best,
        "gdc_mean": float(np.mean(gdc_accs)),
        "baseline_mean": float(np.mean(base_accs)),
        "margin_points": 100 * (float(np.mean(gdc_accs)) - float(np.mean(base_accs))),
    }


def oracle_kl_win_rate(num_tasks=40):
    """Criterion: calibrated Gaussian closer (in KL) to the true novel
    Gaussian than the support-point-plus-average-base-covariance guess."""
    ds, truth = generate(WORLD_SPEC)
    mus, sigmas = oracle_stats(partition(ds, "base"))
    avg_cov = sigmas.mean(axis=0)
    novel = partition(ds, "novel")
    rng = np.random.default_rng(303)
    wins = total = 0
    for _ in range(num_tasks):
        sup_x, sup_y, _, _ = oracle_sample_task(novel, 5, 1, 15, rng)
        for x, y in zip(sup_x, sup_y):
            mu_t, sigma_t = truth[int(y)]
            mu_c, sigma_c = oracle_calibrate(x, mus, sigmas, **KL_CONFIG)
            kl_calibrated = kl_gaussian(mu_c, sigma_c, mu_t, sigma_t)
            kl_plain = kl_gaussian(x, avg_cov, mu_t, sigma_t)
            wins += kl_calibrated < kl_plain
            total += 1
    return {"wins": wins, "total": total, "rate": wins / total}


if __name__ == "__main__":
    margin = oracle_margin()
    print("margin:", margin)
    rate = oracle_kl_win_rate()
    print("kl win rate:", rate)
