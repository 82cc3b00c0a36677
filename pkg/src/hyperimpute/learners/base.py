"""Learner configurations, hyperparameter spaces and the plugin registry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np


class DegenerateTarget(ValueError):
    """The target cannot support a fitted model (empty, or a single class)."""


@dataclass(frozen=True)
class Task:
    kind: str = "regression"
    n_classes: int = 0

    def __post_init__(self):
        if self.kind not in ("regression", "classification"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "classification" and self.n_classes < 2:
            raise ValueError("classification needs at least 2 classes")

    @property
    def is_classification(self) -> bool:
        return self.kind == "classification"


REGRESSION = Task()


def classification(n_classes: int) -> Task:
    return Task("classification", int(n_classes))


# --- hyperparameter domains -------------------------------------------------

@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def __contains__(self, v) -> bool:
        return isinstance(v, (int, np.integer)) and self.lo <= v <= self.hi


@dataclass(frozen=True)
class RealRange:
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")
        if self.log and self.lo <= 0:
            raise ValueError("log-scale ranges need lo > 0")

    def sample(self, rng: np.random.Generator) -> float:
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))
        return float(rng.uniform(self.lo, self.hi))

    def __contains__(self, v) -> bool:
        return isinstance(v, (int, float, np.floating)) and self.lo <= v <= self.hi


@dataclass(frozen=True)
class Choice:
    options: tuple

    def __post_init__(self):
        if not self.options:
            raise ValueError("Choice needs at least one option")

    def sample(self, rng: np.random.Generator):
        return self.options[int(rng.integers(len(self.options)))]

    def __contains__(self, v) -> bool:
        return v in self.options


HyperparamSpace = dict  # name -> IntRange | RealRange | Choice


def sample_params(space: HyperparamSpace, rng: np.random.Generator) -> dict:
    return {name: dom.sample(rng) for name, dom in space.items()}


def in_space(params: dict, space: HyperparamSpace) -> bool:
    return all(name in params and params[name] in dom for name, dom in space.items())


# --- configurations ----------------------------------------------------------

@dataclass(frozen=True)
class LearnerConfig:
    """A point in the joint model/hyperparameter space.

    ``resource_units`` is the native iteration budget (trees or epochs) set by
    budgeted search; ``None`` means the class default.
    """

    cls: str
    params: dict = field(default_factory=dict)
    resource_units: int | None = None

    def key(self) -> tuple:
        return (self.cls, tuple(sorted(self.params.items())), self.resource_units)

    def to_json(self) -> dict:
        out = {"class": self.cls, "params": dict(sorted(self.params.items()))}
        if self.resource_units is not None:
            out["resource_units"] = self.resource_units
        return out

    def describe(self) -> str:
        inner = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.cls}({inner})"


def _fmt(v) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class LearnerSpec:
    """Registry entry: how to build, size and fit one learner class."""

    name: str
    tasks: tuple
    space: Callable[[Task], HyperparamSpace]
    defaults: Callable[[Task], dict]
    fit: Callable[..., Any]
    native_param: str | None = None  # None: closed-form / full-fit class
    max_native: int = 1


REGISTRY: dict[str, LearnerSpec] = {}


def register(spec: LearnerSpec) -> LearnerSpec:
    REGISTRY[spec.name] = spec
    return spec


def get_spec(cls: str) -> LearnerSpec:
    try:
        return REGISTRY[cls]
    except KeyError:
        raise KeyError(f"unknown learner class {cls!r}; registered: {sorted(REGISTRY)}") from None


def supports(cls: str, task: Task) -> bool:
    return task.kind in get_spec(cls).tasks


def default_config(cls: str, task: Task = REGRESSION) -> LearnerConfig:
    spec = get_spec(cls)
    if task.kind not in spec.tasks:
        raise ValueError(f"{cls} does not support {task.kind}")
    return LearnerConfig(cls, dict(spec.defaults(task)))


def config_space(cls: str, task: Task = REGRESSION) -> HyperparamSpace:
    return dict(get_spec(cls).space(task))


def is_full_fit(cls: str) -> bool:
    return get_spec(cls).native_param is None


def set_resource(config: LearnerConfig, units: int) -> LearnerConfig:
    """Give ``config`` a native budget of ``units`` trees/epochs.

    Closed-form classes (ridge, KNN, single tree) ignore the budget and are
    returned unchanged; check :func:`is_full_fit` for that case.
    """
    if units < 1:
        raise ValueError("units must be >= 1")
    spec = get_spec(config.cls)
    if spec.native_param is None:
        return config
    units = int(units)
    params = dict(config.params)
    params[spec.native_param] = units
    return replace(config, params=params, resource_units=units)


def native_budget(config: LearnerConfig) -> int | None:
    spec = get_spec(config.cls)
    if spec.native_param is None:
        return None
    return int(config.params.get(spec.native_param, spec.defaults(REGRESSION).get(spec.native_param, 1)))


_COUNTERPART = {"ridge": "logistic", "logistic": "ridge"}


def class_for(cls: str, task: Task) -> str:
    """``cls`` itself, or its linear counterpart when it cannot model ``task``."""
    if supports(cls, task):
        return cls
    if cls in _COUNTERPART and supports(_COUNTERPART[cls], task):
        return _COUNTERPART[cls]
    raise ValueError(f"no counterpart of {cls} for {task.kind}")


def counterpart(config: LearnerConfig, task: Task) -> LearnerConfig:
    """Translate a config to a class usable for ``task`` (ridge <-> logistic)."""
    if supports(config.cls, task):
        return config
    if config.cls == "ridge" and task.is_classification:
        return default_config("logistic", task)
    if config.cls == "logistic" and not task.is_classification:
        return default_config("ridge", task)
    raise ValueError(f"no counterpart of {config.cls} for {task.kind}")


class FitCounter:
    """Instrumentation: counts config evaluations and raw model fits."""

    def __init__(self):
        self.evaluations = 0
        self.refits = 0
        self.raw_fits = 0
        self.work = 0

    @property
    def fits(self) -> int:
        """Config evaluations plus final refits (CV folds count once)."""
        return self.evaluations + self.refits

    def as_dict(self) -> dict:
        return {"evaluations": self.evaluations, "refits": self.refits, "raw_fits": self.raw_fits}
