"""k-nearest-neighbour regressor/classifier and the constant fallback predictor."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Choice, IntRange, LearnerSpec, register
from .linear import Standardizer

_CHUNK = 512


@njit(cache=True)
def _k_nearest(Q, Z, k):
    """Indices and squared distances of the k nearest rows of Z for every row of Q.

    Rows are scanned in index order and only a strictly smaller distance
    displaces a kept neighbour, so ties go to the lowest row index.
    """
    m, p = Q.shape
    n = Z.shape[0]
    idx = np.empty((m, k), dtype=np.int64)
    dist = np.empty((m, k))
    for i in range(m):
        filled = 0
        for j in range(n):
            d = 0.0
            for c in range(p):
                t = Q[i, c] - Z[j, c]
                d += t * t
            if filled == k and d >= dist[i, k - 1]:
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and dist[i, pos - 1] > d:
                dist[i, pos] = dist[i, pos - 1]
                idx[i, pos] = idx[i, pos - 1]
                pos -= 1
            dist[i, pos] = d
            idx[i, pos] = j
            if filled < k:
                filled += 1
    return idx, dist


class KNNModel:
    def __init__(self, task, n_neighbors=5, weights="uniform"):
        self.task = task
        self.k = int(n_neighbors)
        self.weights = weights

    def fit(self, X, y):
        self.std = Standardizer(X)
        self.Z = self.std(X)
        self.y = y
        self.Z = np.ascontiguousarray(self.Z)
        self.work = X.shape[0] * X.shape[1]
        return self

    def _neighbors(self, Q):
        k = min(self.k, self.Z.shape[0])
        idx, d2 = _k_nearest(np.ascontiguousarray(Q), self.Z, k)
        dist = np.sqrt(d2)
        if self.weights == "distance":
            w = 1.0 / np.maximum(dist, 1e-12)
        else:
            w = np.ones_like(dist)
        return idx, w / w.sum(axis=1, keepdims=True)

    def predict(self, X):
        n = X.shape[0]
        K = self.task.n_classes
        out = np.zeros((n, K)) if self.task.is_classification else np.zeros(n)
        Q = self.std(X)
        for s in range(0, n, _CHUNK):
            idx, w = self._neighbors(Q[s:s + _CHUNK])
            if self.task.is_classification:
                block = np.zeros((idx.shape[0], K))
                labels = self.y[idx]
                for c in range(K):
                    block[:, c] = (w * (labels == c)).sum(axis=1)
                out[s:s + _CHUNK] = block
            else:
                out[s:s + _CHUNK] = (w * self.y[idx]).sum(axis=1)
        return out


class ConstantModel:
    """Mean (regression) or empirical class frequencies (classification)."""

    def __init__(self, task):
        self.task = task

    def fit(self, X, y):
        if self.task.is_classification:
            counts = np.bincount(y, minlength=self.task.n_classes).astype(float)
            self.value = counts / counts.sum() if counts.sum() else np.full(len(counts), 1 / len(counts))
        else:
            self.value = float(np.mean(y)) if y.size else 0.0
        self.work = 1
        return self

    def predict(self, X):
        n = X.shape[0]
        if self.task.is_classification:
            return np.tile(self.value, (n, 1))
        return np.full(n, self.value)


def _fit_knn(config, task, y, X, seed, row_ids=None):
    p = config.params
    return KNNModel(task, p.get("n_neighbors", 5), p.get("weights", "uniform")).fit(X, y)


def _fit_constant(config, task, y, X, seed, row_ids=None):
    return ConstantModel(task).fit(X, y)


register(LearnerSpec(
    name="knn",
    tasks=("regression", "classification"),
    space=lambda task: {"n_neighbors": IntRange(1, 25), "weights": Choice(("uniform", "distance"))},
    defaults=lambda task: {"n_neighbors": 5, "weights": "uniform"},
    fit=_fit_knn,
))

register(LearnerSpec(
    name="constant",
    tasks=("regression", "classification"),
    space=lambda task: {},
    defaults=lambda task: {},
    fit=_fit_constant,
))
