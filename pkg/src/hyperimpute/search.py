"""Per-column model search: cross-validated objective plus naive, random and
Hyperband strategies over the joint space of learner classes and their
hyperparameters.

All strategies minimize: regression columns use out-of-fold RMSE,
classification columns use negative macro AUROC.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import learners as L
from .learners import LearnerConfig, Task
from .metrics import macro_auroc


class InsufficientData(ValueError):
    """Too few rows (or classes) for the requested cross-validation."""


@dataclass(frozen=True)
class Objective:
    kind: str = "rmse"  # "rmse" | "neg_auroc"
    folds: int = 3

    def __post_init__(self):
        if self.kind not in ("rmse", "neg_auroc"):
            raise ValueError(f"unknown objective {self.kind!r}")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")


def objective_for(task: Task, folds: int = 3) -> Objective:
    return Objective("neg_auroc" if task.is_classification else "rmse", folds)


@dataclass(frozen=True)
class SearchStrategy:
    kind: str = "hyperband"  # "naive" | "random" | "hyperband"
    n_samples: int = 20
    eta: int = 3
    max_resource: int = 27

    def __post_init__(self):
        if self.kind not in ("naive", "random", "hyperband"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "hyperband" and (self.eta < 2 or self.max_resource < self.eta):
            raise ValueError("hyperband needs eta >= 2 and max_resource >= eta")
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")


@dataclass
class Evaluation:
    config: LearnerConfig
    score: float
    resource: float | None = None
    wall_time: float = 0.0


@dataclass
class SearchResult:
    best: LearnerConfig
    best_score: float
    evaluations: list = field(default_factory=list)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


# --- cross-validation --------------------------------------------------------

def fold_assignment(targets, task: Task, folds: int, seed) -> np.ndarray:
    """Shuffled k-fold ids; stratified by class for classification targets."""
    n = len(targets)
    rng = _rng(seed)
    ids = np.empty(n, dtype=np.int64)
    if task.is_classification:
        y = np.asarray(targets, dtype=np.int64)
        offset = 0
        for c in np.unique(y):
            members = rng.permutation(np.flatnonzero(y == c))
            ids[members] = (np.arange(members.size) + offset) % folds
            offset += members.size
    else:
        ids[rng.permutation(n)] = np.arange(n) % folds
    return ids


def cv_objective(config: LearnerConfig, task: Task, targets, regressors, objective: Objective,
                 seed=0, counter: L.FitCounter | None = None, folds_ids=None) -> float:
    """Mean out-of-fold RMSE or negative AUROC; lower is better."""
    y = np.asarray(targets)
    X = np.asarray(regressors, dtype=np.float64)
    k = objective.folds
    if y.shape[0] < k:
        raise InsufficientData(f"{y.shape[0]} rows for {k} folds")
    if folds_ids is None:
        folds_ids = fold_assignment(y, task, k, seed)
    scores = []
    for f in range(k):
        test = folds_ids == f
        train = ~test
        if not test.any():
            continue
        if task.is_classification and np.unique(y[train]).size < 2:
            raise InsufficientData("a training fold holds a single class")
        model = L.fit(config, task, y[train], X[train], seed=_fold_seed(seed, f),
                      row_ids=np.flatnonzero(train), counter=counter)
        pred = model.predict(X[test])
        if task.is_classification:
            a = macro_auroc(pred, y[test])
            if a is not None:
                scores.append(-a)
        else:
            scores.append(float(np.sqrt(np.mean((pred - y[test]) ** 2))))
    if not scores:
        raise InsufficientData("no fold supports the objective")
    if counter is not None:
        counter.evaluations += 1
    return float(np.mean(scores))


def _fold_seed(seed, f: int) -> int:
    ss = np.random.SeedSequence(seed).spawn(f + 1)[f]
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(12))


# --- generic search problem --------------------------------------------------

@dataclass
class SearchProblem:
    """What a strategy needs: the classes, how to build configs, how to score them."""

    classes: tuple
    evaluate: Callable[[LearnerConfig], float]
    task: Task = L.REGRESSION
    incumbent: LearnerConfig | None = None  # previous winner, re-scored first

    def __post_init__(self):
        if not self.classes:
            raise ValueError("empty catalogue")
        self._cache: dict = {}

    def default(self, cls: str) -> LearnerConfig:
        return L.default_config(cls, self.task)

    def sample(self, cls: str, rng: np.random.Generator) -> LearnerConfig:
        params = L.default_config(cls, self.task).params
        params.update(L.sample_params(L.config_space(cls, self.task), rng))
        return LearnerConfig(cls, params)

    def score(self, config: LearnerConfig, resource=None) -> Evaluation:
        t0 = time.perf_counter()
        key = config.key()
        if key not in self._cache:
            self._cache[key] = self.evaluate(config)
        return Evaluation(config, self._cache[key], resource, time.perf_counter() - t0)


def _incumbent(problem: SearchProblem) -> list:
    inc = problem.incumbent
    if inc is None or inc.cls not in problem.classes:
        return []
    return [problem.score(inc, inc.resource_units)]


def _best(evaluations) -> SearchResult:
    best = min(range(len(evaluations)), key=lambda i: (evaluations[i].score, i))
    return SearchResult(evaluations[best].config, evaluations[best].score, list(evaluations))


def search_naive(problem: SearchProblem) -> SearchResult:
    return _best(_incumbent(problem) + [problem.score(problem.default(c)) for c in problem.classes])


def search_random(problem: SearchProblem, n_samples: int, seed) -> SearchResult:
    if n_samples <= 0:
        return search_naive(problem)
    rng = _rng(seed)
    evals = _incumbent(problem) + [problem.score(problem.default(c)) for c in problem.classes]
    for i in range(n_samples):
        evals.append(problem.score(problem.sample(problem.classes[i % len(problem.classes)], rng)))
    return _best(evals)


# --- Hyperband -----------------------------------------------------------------

def _log_floor(R: float, eta: int) -> int:
    s = int(math.floor(math.log(R) / math.log(eta) + 1e-9))
    while eta ** (s + 1) <= R:
        s += 1
    while s > 0 and eta ** s > R:
        s -= 1
    return s


def hyperband_schedule(eta: int, R: float) -> list:
    """Brackets s = s_max..0, each a list of (n_configs, resource) rungs."""
    if eta < 2 or R < eta:
        raise ValueError("need eta >= 2 and R >= eta")
    s_max = _log_floor(R, eta)
    brackets = []
    for s in range(s_max, -1, -1):
        n = int(math.ceil((s_max + 1) / (s + 1) * eta ** s))
        r = R * eta ** (-s)
        rungs = [(int(n // eta ** i), _tidy(r * eta ** i)) for i in range(s + 1)]
        brackets.append(rungs)
    return brackets


def _tidy(x: float):
    return int(round(x)) if abs(x - round(x)) < 1e-9 else x


def schedule_evaluations(schedule) -> int:
    return sum(n for rungs in schedule for n, _ in rungs)


@dataclass(frozen=True)
class ResourceScaling:
    """Native iterations (trees, epochs) per Hyperband resource unit, per class."""

    per_unit: dict = field(default_factory=dict)

    def native(self, cls: str, r: float) -> int | None:
        spec = L.get_spec(cls)
        if spec.native_param is None:
            return None
        units = self.per_unit.get(cls, 1.0)
        return int(min(max(round(r * units), 1), spec.max_native))


def work_cost(model, cls: str, iterations: int, seconds: float) -> float:
    return float(getattr(model, "work", iterations))


def time_cost(model, cls: str, iterations: int, seconds: float) -> float:
    return seconds


def calibrate_resource_scaling(catalogue, task: Task, probe_targets, probe_regressors, seed=0,
                               cost=work_cost, probe_iterations=(1, 5, 10)) -> ResourceScaling:
    """Fit each iterative class at 1, 5 and 10 native iterations and equalize the
    cost of one resource unit across classes.

    ``cost(model, cls, iterations, seconds)`` measures one probe fit; the default
    uses the learners' deterministic work counters so the mapping (and hence the
    search) is reproducible.  ``time_cost`` measures wall time instead.
    """
    y = np.asarray(probe_targets)
    X = np.asarray(probe_regressors, dtype=np.float64)
    if y.shape[0] == 0:
        raise ValueError("empty probe data")
    slopes = {}
    for cls in L.catalogue_for(task, catalogue):
        if L.is_full_fit(cls):
            continue
        its = np.asarray(probe_iterations, dtype=float)
        costs = []
        for it in probe_iterations:
            cfg = L.set_resource(L.default_config(cls, task), int(it))
            t0 = time.perf_counter()
            model = L.fit(cfg, task, y, X, seed=seed)
            costs.append(cost(model, cls, int(it), time.perf_counter() - t0))
        slope = np.polyfit(its, np.asarray(costs, dtype=float), 1)[0]
        slopes[cls] = max(float(slope), 1e-12)
    if not slopes:
        return ResourceScaling({})
    ref = max(slopes.values())
    return ResourceScaling({cls: max(1.0, ref / s) for cls, s in slopes.items()})


def search_hyperband(problem: SearchProblem, eta: int, R: float, scaling: ResourceScaling,
                     seed) -> SearchResult:
    rng = _rng(seed)
    evals = _incumbent(problem)
    pending_defaults = list(problem.classes)
    for rungs in hyperband_schedule(eta, R):
        n0 = rungs[0][0]
        configs = []
        for _ in range(n0):
            if pending_defaults:
                configs.append(problem.default(pending_defaults.pop(0)))
            else:
                cls = problem.classes[int(rng.integers(len(problem.classes)))]
                configs.append(problem.sample(cls, rng))
        for i, (n_i, r_i) in enumerate(rungs):
            scored = []
            for cfg in configs:
                native = scaling.native(cfg.cls, r_i)
                run_cfg = cfg if native is None else L.set_resource(cfg, native)
                ev = problem.score(run_cfg, r_i)
                evals.append(ev)
                scored.append(ev.score)
            if i + 1 < len(rungs):
                keep = rungs[i + 1][0]
                order = sorted(range(len(configs)), key=lambda j: (scored[j], j))
                configs = [configs[j] for j in order[:keep]]
    return _best(evals)


# --- per-column entry points ------------------------------------------------

def column_problem(task: Task, targets, regressors, catalogue, objective: Objective, seed,
                   counter=None, incumbent=None) -> SearchProblem:
    y = np.asarray(targets)
    if y.shape[0] < objective.folds:
        raise InsufficientData(f"{y.shape[0]} rows for {objective.folds} folds")
    folds_ids = fold_assignment(y, task, objective.folds, seed)
    classes = L.catalogue_for(task, catalogue)

    def evaluate(cfg):
        return cv_objective(cfg, task, y, regressors, objective, seed, counter, folds_ids)

    return SearchProblem(classes, evaluate, task, incumbent)


def model_search_naive(task, targets, regressors, catalogue=L.CATALOGUE, objective=None,
                       seed=0, counter=None) -> SearchResult:
    objective = objective or objective_for(task)
    return search_naive(column_problem(task, targets, regressors, catalogue, objective, seed, counter))


def model_search_random(task, targets, regressors, catalogue=L.CATALOGUE, objective=None,
                        n_samples=20, seed=0, counter=None) -> SearchResult:
    objective = objective or objective_for(task)
    problem = column_problem(task, targets, regressors, catalogue, objective, seed, counter)
    return search_random(problem, n_samples, seed)


def model_search_hyperband(task, targets, regressors, catalogue=L.CATALOGUE, objective=None,
                           eta=3, R=27, scaling=None, seed=0, counter=None) -> SearchResult:
    objective = objective or objective_for(task)
    problem = column_problem(task, targets, regressors, catalogue, objective, seed, counter)
    if scaling is None:
        scaling = calibrate_resource_scaling(catalogue, task, targets, regressors, seed)
    return search_hyperband(problem, eta, R, scaling, seed)


def run_strategy(strategy: SearchStrategy, problem: SearchProblem, scaling, seed) -> SearchResult:
    if strategy.kind == "naive":
        return search_naive(problem)
    if strategy.kind == "random":
        return search_random(problem, strategy.n_samples, seed)
    return search_hyperband(problem, strategy.eta, strategy.max_resource, scaling, seed)
