"""Ridge regression (closed form) and one-vs-rest logistic regression (gradient descent).

Both standardize their inputs with training statistics, which makes them
invariant to per-column affine rescaling of the regressors.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import (
    REGRESSION, LearnerSpec, RealRange, Task, register,
)

LOGISTIC_DEFAULT_EPOCHS = 100
LOGISTIC_STEP = 0.1


class Standardizer:
    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd <= 1e-12 * (1.0 + np.abs(self.mean))] = 1.0
        self.scale = sd

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


class RidgeModel:
    """Minimizes ||y - b - Z w||^2 + alpha ||w||^2 on standardized Z."""

    def __init__(self, alpha: float):
        self.alpha = alpha

    def fit(self, X, y):
        self.std = Standardizer(X)
        Z = self.std(X)
        self.intercept = float(y.mean())
        yc = y - self.intercept
        A = Z.T @ Z + self.alpha * np.eye(Z.shape[1])
        rhs = Z.T @ yc
        try:
            self.coef = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            self.coef = np.linalg.lstsq(A, rhs, rcond=None)[0]
        self.work = X.shape[0] * X.shape[1] ** 2
        return self

    def predict(self, X):
        if X.shape[0] == 0:
            return np.zeros(0)
        return self.intercept + self.std(X) @ self.coef


class LogisticModel:
    """One-vs-rest logistic regression by full-batch gradient descent.

    Per-sample objective: mean log-loss + ||w||^2 / (2 C n).  The step is
    0.1 / sqrt(t), capped by the inverse Lipschitz bound of the gradient so
    every epoch decreases the objective.
    """

    def __init__(self, C: float, epochs: int, n_classes: int):
        self.C = C
        self.epochs = int(epochs)
        self.n_classes = n_classes

    def _targets(self, y):
        K = self.n_classes
        if K == 2:
            return (y == 1).astype(float)[:, None]
        Y = np.zeros((y.shape[0], K))
        Y[np.arange(y.shape[0]), y] = 1.0
        return Y

    def objective(self, Z, Y, W, b):
        n = Z.shape[0]
        F = Z @ W + b
        loss = np.logaddexp(0.0, F) - Y * F
        return float(loss.sum() / n + (W * W).sum() / (2 * self.C * n))

    def fit(self, X, y):
        self.std = Standardizer(X)
        Z = self.std(X)
        n, p = Z.shape
        Y = self._targets(y)
        W = np.zeros((p, Y.shape[1]))
        b = np.zeros(Y.shape[1])
        reg = 1.0 / (self.C * n)
        Zaug = np.hstack([Z, np.ones((n, 1))])
        lipschitz = 0.25 * np.linalg.norm(Zaug, 2) ** 2 / n + reg
        self.losses = []
        for t in range(1, self.epochs + 1):
            P = expit(Z @ W + b)
            G = P - Y
            gW = Z.T @ G / n + reg * W
            gb = G.mean(axis=0)
            step = min(LOGISTIC_STEP / np.sqrt(t), 1.0 / lipschitz)
            W -= step * gW
            b -= step * gb
            self.losses.append(self.objective(Z, Y, W, b))
        self.W, self.b = W, b
        self.work = self.epochs * n * p
        return self

    def predict(self, X):
        if X.shape[0] == 0:
            return np.zeros((0, self.n_classes))
        P = expit(self.std(X) @ self.W + self.b)
        if self.n_classes == 2:
            return np.hstack([1.0 - P, P])
        P = np.clip(P, 1e-12, None)
        return P / P.sum(axis=1, keepdims=True)


def _fit_ridge(config, task, y, X, seed, row_ids=None):
    return RidgeModel(float(config.params.get("alpha", 1.0))).fit(X, y)


def _fit_logistic(config, task, y, X, seed, row_ids=None):
    params = config.params
    epochs = params.get("epochs", LOGISTIC_DEFAULT_EPOCHS)
    return LogisticModel(float(params.get("C", 1e-2)), epochs, task.n_classes).fit(X, y)


register(LearnerSpec(
    name="ridge",
    tasks=("regression",),
    space=lambda task: {"alpha": RealRange(1e-3, 10.0, log=True)},
    defaults=lambda task: {"alpha": 1.0},
    fit=_fit_ridge,
))

register(LearnerSpec(
    name="logistic",
    tasks=("classification",),
    space=lambda task: {"C": RealRange(1e-3, 1e-2, log=True)},
    defaults=lambda task: {"C": 1e-2, "epochs": LOGISTIC_DEFAULT_EPOCHS},
    fit=_fit_logistic,
    native_param="epochs",
    max_native=1000,
))

__all__ = ["RidgeModel", "LogisticModel", "Standardizer", "REGRESSION", "Task"]
