"""Plugin catalogue of univariate conditional models.

Every learner follows the fit/predict contract: regression models return one
real per row, classification models a probability row over ``n_classes``
integer codes ``0..K-1``.
"""

from __future__ import annotations

import numpy as np

from .base import (
    REGISTRY, REGRESSION, Choice, DegenerateTarget, FitCounter, HyperparamSpace, IntRange,
    LearnerConfig, LearnerSpec, RealRange, Task, class_for, classification, config_space, counterpart,
    default_config, get_spec, in_space, is_full_fit, native_budget, register, sample_params,
    set_resource, supports,
)
from . import linear, trees, knn  # noqa: F401  (registration side effects)

CATALOGUE = ("ridge", "logistic", "tree", "forest", "boosting", "knn")


def catalogue_for(task: Task, catalogue=CATALOGUE) -> tuple:
    """The classes of ``catalogue`` that can model ``task``."""
    return tuple(c for c in catalogue if supports(c, task))


def fit(config: LearnerConfig, task: Task, targets, regressors, seed: int = 0,
        row_ids=None, counter: FitCounter | None = None):
    """Train ``config`` on (regressors -> targets)."""
    X = np.asarray(regressors, dtype=np.float64)
    y = np.asarray(targets)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"regressors {X.shape} do not match {y.shape[0]} targets")
    if y.shape[0] < 1:
        raise DegenerateTarget("empty training set")
    if np.isnan(X).any():
        raise ValueError("regressors contain NA")
    if task.is_classification:
        y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= task.n_classes:
            raise ValueError("class codes must lie in 0..K-1")
        if config.cls != "constant" and np.unique(y).size < 2:
            raise DegenerateTarget("fewer than 2 observed classes")
    else:
        y = y.astype(np.float64)
    spec = get_spec(config.cls)
    if task.kind not in spec.tasks:
        raise ValueError(f"{config.cls} cannot handle {task.kind}")
    model = spec.fit(config, task, y, X, seed, row_ids)
    model.n_features = X.shape[1]
    if counter is not None:
        counter.raw_fits += 1
        counter.work += getattr(model, "work", 0)
    return model


def predict(model, regressors):
    X = np.asarray(regressors, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} regressor columns, got {X.shape}")
    return model.predict(X)


__all__ = [
    "CATALOGUE", "REGISTRY", "REGRESSION", "Choice", "DegenerateTarget", "FitCounter",
    "HyperparamSpace", "IntRange", "LearnerConfig", "LearnerSpec", "RealRange", "Task",
    "catalogue_for", "class_for", "classification", "config_space", "counterpart", "default_config", "fit",
    "get_spec", "in_space", "is_full_fit", "native_budget", "predict", "register",
    "sample_params", "set_resource", "supports",
]
