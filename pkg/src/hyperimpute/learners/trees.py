"""CART, random forest and gradient boosting built on the compiled tree kernels."""

from __future__ import annotations

import math

import numpy as np

from . import _tree
from .base import Choice, IntRange, LearnerSpec, register

_MASK64 = (1 << 64) - 1
# Poisson(1) inverse CDF, enough terms for any 53-bit uniform
_POISSON1_CDF = np.cumsum([math.exp(-1) / math.factorial(j) for j in range(20)])


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays."""
    x = (x + np.uint64(0x9E3779B97F4A7C15))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def keyed_uniform(seed: int, stream: int, ids: np.ndarray) -> np.ndarray:
    """Uniforms in [0, 1) that depend only on (seed, stream, id)."""
    with np.errstate(over="ignore"):
        base = _mix64(np.array([(seed & _MASK64)], dtype=np.uint64))[0]
        base = _mix64(np.array([base ^ np.uint64(stream & _MASK64)], dtype=np.uint64))[0]
        x = _mix64(np.asarray(ids, dtype=np.uint64) ^ base)
    return (x >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def poisson_bootstrap(seed: int, tree: int, row_ids: np.ndarray) -> np.ndarray:
    """Poisson(1) bootstrap counts keyed by row id, so row order is irrelevant."""
    u = keyed_uniform(seed, tree + 1, row_ids)
    return np.searchsorted(_POISSON1_CDF, u, side="right").astype(np.float64)


def _tree_seed(seed: int, tree: int) -> int:
    return int(keyed_uniform(seed, 0x7EED, np.array([tree]))[0] * (1 << 53))


def presort(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))


class TreeEnsemble:
    """Packed list of trees evaluated as ``sum_t weight_t * leaf_value_t(x)``."""

    def __init__(self):
        self.trees = []
        self.weights = []

    def add(self, tree, weight=1.0):
        self.trees.append(tree)
        self.weights.append(weight)

    def pack(self):
        offs = np.cumsum([0] + [t[0].shape[0] for t in self.trees])
        feats, thrs, lefts, rights, vals = [], [], [], [], []
        for off, (f, th, l, r, v) in zip(offs, self.trees):
            feats.append(f)
            thrs.append(th)
            lefts.append(np.where(l >= 0, l + off, -1))
            rights.append(np.where(r >= 0, r + off, -1))
            vals.append(v)
        self.packed = (
            np.concatenate(feats), np.concatenate(thrs), np.concatenate(lefts),
            np.concatenate(rights), np.ascontiguousarray(np.concatenate(vals)),
            offs[:-1].astype(np.int64), np.asarray(self.weights, dtype=np.float64),
        )
        return self

    def raw(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _tree.predict_ensemble(X, *self.packed)


def _targets(y, task):
    if task.is_classification:
        Y = np.zeros((y.shape[0], task.n_classes))
        Y[np.arange(y.shape[0]), y] = 1.0
        return Y
    return np.ascontiguousarray(y, dtype=np.float64)[:, None]


def _max_features(setting, p: int) -> int:
    if setting in (None, "all"):
        return p
    if setting == "sqrt":
        return max(1, int(math.sqrt(p)))
    if setting == "log2":
        return max(1, int(math.log2(p))) if p > 1 else 1
    return max(1, min(p, int(setting)))


def _depth(v) -> int:
    return -1 if v is None else int(v)


class DecisionTreeModel:
    def __init__(self, task, max_depth=None, min_samples_split=2, min_samples_leaf=1):
        self.task = task
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        Y = _targets(y, self.task)
        tree = _tree.build_tree(X, presort(X), Y, np.ones(X.shape[0]), _depth(self.max_depth),
                                float(self.min_samples_split), float(self.min_samples_leaf), 0, 0)
        self.work = int(tree[6])
        self.ens = TreeEnsemble()
        self.ens.add(tree[:5])
        self.ens.pack()
        return self

    def predict(self, X):
        out = self.ens.raw(X)
        return out if self.task.is_classification else out[:, 0]


class RandomForestModel:
    """Bagged CART with per-node feature subsampling.

    Tree ``t`` sees Poisson(1) bootstrap weights keyed by (seed, t, row id),
    so growing more trees extends, never changes, an existing forest.
    """

    def __init__(self, task, n_estimators=100, max_depth=4, min_samples_split=2,
                 min_samples_leaf=2, max_features="all", seed=0):
        self.task = task
        self.n_estimators = int(n_estimators)
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.seed = int(seed)

    def fit(self, X, y, row_ids=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        n, p = X.shape
        row_ids = np.arange(n) if row_ids is None else np.asarray(row_ids)
        Y = _targets(y, self.task)
        order = presort(X)
        mf = _max_features(self.max_features, p)
        self.ens = TreeEnsemble()
        self.work = 0
        for t in range(self.n_estimators):
            w = poisson_bootstrap(self.seed, t, row_ids)
            if not w.any():
                w = np.ones(n)
            tree = _tree.build_tree(X, order, Y, w, _depth(self.max_depth),
                                    float(self.min_samples_split), float(self.min_samples_leaf),
                                    mf, _tree_seed(self.seed, t))
            self.work += int(tree[6])
            self.ens.add(tree[:5])
        self.ens.pack()
        return self

    def predict(self, X):
        # sum then divide, so identical trees average to their exact value
        out = self.ens.raw(X) / len(self.ens.trees)
        return out if self.task.is_classification else out[:, 0]


class GradientBoostingModel:
    """Least-squares gradient boosting.

    Regression fits each tree to the residuals y - F.  Classification boosts
    K softmax scores with one multi-output tree per round on the residuals
    onehot - softmax(F), using per-class Newton leaf values.
    """

    def __init__(self, task, n_estimators=100, max_depth=3, learning_rate=0.1,
                 min_samples_leaf=1):
        self.task = task
        self.n_estimators = int(n_estimators)
        self.max_depth = max_depth
        self.learning_rate = float(learning_rate)
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        n = X.shape[0]
        order = presort(X)
        ones = np.ones(n)
        self.ens = TreeEnsemble()
        self.work = 0
        self.train_rmse = []
        lr = self.learning_rate
        if self.task.is_classification:
            K = self.task.n_classes
            Y = _targets(y, self.task)
            prior = np.clip(Y.mean(axis=0), 1e-6, None)
            self.init = np.log(prior / prior.sum())
            F = np.tile(self.init, (n, 1))
        else:
            Y = None
            self.init = float(y.mean())
            F = np.full(n, self.init)
        for _ in range(self.n_estimators):
            if self.task.is_classification:
                P = _softmax(F)
                R = np.ascontiguousarray(Y - P)
            else:
                R = np.ascontiguousarray((y - F)[:, None])
                self.train_rmse.append(float(np.sqrt(np.mean(R * R))))
            f, th, l, r, v, leaf, work = _tree.build_tree(
                X, order, R, ones, _depth(self.max_depth), 2.0, float(self.min_samples_leaf), 0, 0)
            self.work += int(work)
            if self.task.is_classification:
                num = np.zeros((v.shape[0], K))
                den = np.zeros((v.shape[0], K))
                absr = np.abs(R)
                for c in range(K):
                    num[:, c] = np.bincount(leaf, weights=R[:, c], minlength=v.shape[0])
                    den[:, c] = np.bincount(leaf, weights=absr[:, c] * (1 - absr[:, c]),
                                            minlength=v.shape[0])
                v = (K - 1) / K * num / np.maximum(den, 1e-12)
                F = F + lr * v[leaf]
            else:
                F = F + lr * v[leaf, 0]
            self.ens.add((f, th, l, r, np.ascontiguousarray(v)), lr)
        if not self.task.is_classification:
            self.train_rmse.append(float(np.sqrt(np.mean((y - F) ** 2))))
        self.ens.pack()
        return self

    def predict(self, X):
        if self.n_estimators == 0 or not self.ens.trees:
            raw = np.zeros((X.shape[0], self.task.n_classes if self.task.is_classification else 1))
        else:
            raw = self.ens.raw(X)
        if self.task.is_classification:
            return _softmax(raw + self.init)
        return raw[:, 0] + self.init


def _softmax(F):
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _fit_tree(config, task, y, X, seed, row_ids=None):
    p = config.params
    return DecisionTreeModel(task, p.get("max_depth", 6), p.get("min_samples_split", 2),
                             p.get("min_samples_leaf", 1)).fit(X, y)


def _fit_forest(config, task, y, X, seed, row_ids=None):
    p = config.params
    model = RandomForestModel(task, p.get("n_estimators", 100), p.get("max_depth", 4),
                              p.get("min_samples_split", 2), p.get("min_samples_leaf", 2),
                              p.get("max_features", "all"), seed)
    return model.fit(X, y, row_ids)


def _fit_boosting(config, task, y, X, seed, row_ids=None):
    p = config.params
    return GradientBoostingModel(task, p.get("n_estimators", 100), p.get("max_depth", 3),
                                 p.get("learning_rate", 0.1)).fit(X, y)


register(LearnerSpec(
    name="tree",
    tasks=("regression", "classification"),
    space=lambda task: {"max_depth": IntRange(1, 8), "min_samples_leaf": Choice((1, 2, 5, 10))},
    defaults=lambda task: {"max_depth": 6, "min_samples_leaf": 1},
    fit=_fit_tree,
))

register(LearnerSpec(
    name="forest",
    tasks=("regression", "classification"),
    space=lambda task: {
        "max_depth": IntRange(1, 4),
        "min_samples_split": Choice((2, 5, 10)),
        "min_samples_leaf": Choice((2, 5, 10)),
        "n_estimators": IntRange(10, 100),
        "max_features": Choice(("all", "sqrt", "log2")),
    },
    defaults=lambda task: {
        "max_depth": 4, "min_samples_split": 2, "min_samples_leaf": 2, "n_estimators": 100,
        "max_features": "sqrt" if task.is_classification else "all",
    },
    fit=_fit_forest,
    native_param="n_estimators",
    max_native=100,
))

register(LearnerSpec(
    name="boosting",
    tasks=("regression", "classification"),
    space=lambda task: {
        "max_depth": IntRange(1, 5),
        "n_estimators": IntRange(10, 100),
        "learning_rate": Choice((1e-2, 1e-1)),
    },
    defaults=lambda task: {"max_depth": 3, "n_estimators": 100, "learning_rate": 0.1},
    fit=_fit_boosting,
    native_param="n_estimators",
    max_native=100,
))
