"""Unsupervised structure in state representations: 2-D embeddings and a
diagonal-covariance Gaussian mixture.

The t-SNE here is the exact O(n^2) algorithm (conditional-probability
perplexity calibration by bisection, Student-t low-dimensional kernel,
gradient descent with early exaggeration, momentum and per-coordinate
gains); corpora in this package stay in the low thousands of points. The
mixture model is fit by EM with k-means++ seeding and restarts, and cluster
quality against known type labels is scored by the best one-to-one
cluster-to-type assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


def pca_embed(X):
    """Top-two principal-component scores, deterministic sign convention."""
    X = np.asarray(X, dtype=float)
    if len(X) < 3:
        raise ValueError("need at least 3 points")
    centered = X - X.mean(axis=0)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    out = np.zeros((len(X), 2))
    for comp in range(min(2, vt.shape[0])):
        if s[comp] <= 1e-12 * max(s[0], 1e-30):
            break  # degenerate directions stay zero-padded
        axis = vt[comp]
        lead = axis[np.argmax(np.abs(axis))]
        sign = 1.0 if lead >= 0 else -1.0
        out[:, comp] = sign * centered @ axis
    return out


def _squared_distances(X):
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.clip(d2, 0.0, None)


def _calibrated_affinities(d2, perplexity, tol=1e-5, max_iter=64):
    """Per-point precisions found by bisection so each row's conditional
    distribution has entropy log(perplexity)."""
    n = d2.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_iter):
            w = np.exp(-row * beta)
            total = max(w.sum(), 1e-300)
            h = np.log(total) + beta * float((row * w).sum()) / total
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        w = np.exp(-row * beta)
        w = w / max(w.sum(), 1e-300)
        P[i, np.arange(n) != i] = w
    return P


def tsne_embed(X, perplexity=30.0, n_iter=1000, seed=0, learning_rate=200.0):
    """Exact t-SNE to two dimensions; seeded and deterministic."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n < 3:
        raise ValueError("need at least 3 points")
    perplexity = min(perplexity, (n - 1) / 3.0)
    perplexity = max(perplexity, 2.0)
    P = _calibrated_affinities(_squared_distances(X), perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)

    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    exaggeration_until = min(250, n_iter // 4)
    for it in range(n_iter):
        momentum = 0.5 if it < exaggeration_until else 0.8
        p_eff = P * 12.0 if it < exaggeration_until else P
        d2 = _squared_distances(Y)
        inv = 1.0 / (1.0 + d2)
        np.fill_diagonal(inv, 0.0)
        Q = np.maximum(inv / inv.sum(), 1e-12)
        weight = (p_eff - Q) * inv
        grad = 4.0 * ((np.diag(weight.sum(axis=1)) - weight) @ Y)
        same_dir = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_dir, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
    return Y


def embed2d(X, method="pca", seed=0, perplexity=30.0, n_iter=1000):
    if method == "pca":
        return pca_embed(X)
    if method == "tsne":
        return tsne_embed(X, perplexity=perplexity, n_iter=n_iter, seed=seed)
    raise ValueError(f"unknown embedding method {method!r}")


# ---------------------------------------------------------------------------
# Gaussian mixture with diagonal covariances
# ---------------------------------------------------------------------------

@dataclass
class GMMModel:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d), diagonal covariances

    def log_responsibilities(self, X):
        X = np.asarray(X, dtype=float)
        lp = np.empty((len(X), len(self.weights)))
        for c in range(len(self.weights)):
            diff2 = (X - self.means[c]) ** 2 / self.variances[c]
            lp[:, c] = (
                np.log(self.weights[c])
                - 0.5 * np.sum(np.log(2 * np.pi * self.variances[c]))
                - 0.5 * diff2.sum(axis=1)
            )
        return lp

    def log_likelihood(self, X):
        lp = self.log_responsibilities(X)
        m = lp.max(axis=1)
        return float((m + np.log(np.exp(lp - m[:, None]).sum(axis=1))).sum())

    def predict(self, X):
        return np.argmax(self.log_responsibilities(X), axis=1)


def _kmeans_pp_seeds(X, k, rng):
    idx = [int(rng.integers(len(X)))]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((X - X[i]) ** 2, axis=1) for i in idx], axis=0
        )
        total = d2.sum()
        if total <= 0:
            idx.append(int(rng.integers(len(X))))
            continue
        idx.append(int(rng.choice(len(X), p=d2 / total)))
    return X[np.array(idx)]


def _em_once(X, k, rng, max_iter, tol, reg):
    n, d = X.shape
    means = _kmeans_pp_seeds(X, k, rng)
    global_var = X.var(axis=0) + reg
    variances = np.tile(global_var, (k, 1))
    weights = np.full(k, 1.0 / k)
    model = GMMModel(weights, means, variances)
    prev = -np.inf
    for _ in range(max_iter):
        lp = model.log_responsibilities(X)
        m = lp.max(axis=1, keepdims=True)
        resp = np.exp(lp - m)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        for c in range(k):
            if nk[c] < 1e-10:  # empty component: re-seed on a random point
                means[c] = X[int(rng.integers(n))]
                variances[c] = global_var
                weights[c] = 1.0 / n
                continue
            means[c] = resp[:, c] @ X / nk[c]
            diff2 = (X - means[c]) ** 2
            variances[c] = resp[:, c] @ diff2 / nk[c] + reg
            weights[c] = nk[c] / n
        weights /= weights.sum()
        ll = model.log_likelihood(X)
        if abs(ll - prev) < tol * max(1.0, abs(ll)):
            break
        prev = ll
    return model, model.log_likelihood(X)


def gmm_fit(X, n_components, seed=0, restarts=10, max_iter=200, tol=1e-8,
            reg=1e-6):
    """Best-of-restarts EM fit; returns the model with highest likelihood."""
    X = np.asarray(X, dtype=float)
    if n_components > len(X):
        raise ValueError("more components than points")
    rng = np.random.default_rng(seed)
    best, best_ll = None, -np.inf
    for _ in range(restarts):
        model, ll = _em_once(X, n_components, rng, max_iter, tol, reg)
        if ll > best_ll:
            best, best_ll = model, ll
    return best


def gmm_cluster(X, n_components, seed=0, restarts=10):
    model = gmm_fit(X, n_components, seed=seed, restarts=restarts)
    return model.predict(X)


def match_rate(pred_labels, true_labels):
    """Fraction matched under the best one-to-one cluster/type assignment."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise ValueError("label arrays must have equal length")
    pred_vals = sorted(set(pred.tolist()))
    true_vals = sorted(set(true.tolist()))
    table = np.zeros((len(pred_vals), len(true_vals)))
    for pv, tv in zip(pred, true):
        table[pred_vals.index(pv), true_vals.index(tv)] += 1
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / len(pred))
