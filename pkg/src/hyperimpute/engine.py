"""Iterative imputation with per-column automatic model selection.

The outer loop revisits every column with missing cells; each visit builds
the observed/missing split from the current imputations, (re)selects a
learner for the column with the configured search strategy, refits it on the
observed rows and overwrites the column's missing cells with its
predictions.  Observed cells are never written.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import learners as L
from .data import ImputedDataset, IncompleteDataset
from .learners import DegenerateTarget, FitCounter, LearnerConfig, Task
from .metrics import rmse_missing, wasserstein_missing
from .search import (
    InsufficientData, Objective, ResourceScaling, SearchProblem, SearchStrategy,
    calibrate_resource_scaling, column_problem, cv_objective, fold_assignment, objective_for,
    run_strategy, search_naive,
)

log = logging.getLogger(__name__)

ABLATIONS = ("ice_fixed", "global_search", "column_naive", "wo_flexibility", "wo_adaptivity", "full")


@dataclass(frozen=True)
class Ablation:
    """Switches for column-wise (A), automatic (B), adaptive (C) and flexible (D) selection."""

    column_wise: bool = True
    auto_select: bool = True
    adaptive: bool = True
    flexible: bool = True
    restricted_class: str | None = None

    def __post_init__(self):
        if (self.restricted_class is None) != self.flexible:
            raise ValueError("restricted_class is required exactly when flexible=False")


@dataclass(frozen=True)
class EngineConfig:
    max_outer_iters: int = 10
    tol_imp: float = 1e-3
    objective_patience: int = 3
    visitation: str = "ascending_index"  # or "ascending_missingness"
    strategy: SearchStrategy = field(default_factory=SearchStrategy)
    baseline: str = "mean"
    skip: str = "reuse_after_stable"  # or "never"
    skip_m: int = 2
    ablation: Ablation = field(default_factory=Ablation)
    catalogue: tuple = L.CATALOGUE
    folds: int = 3

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.tol_imp <= 0:
            raise ValueError("tol_imp must be > 0")
        if self.visitation not in ("ascending_index", "ascending_missingness"):
            raise ValueError(f"unknown visitation order {self.visitation!r}")
        if self.skip not in ("never", "reuse_after_stable"):
            raise ValueError(f"unknown skip policy {self.skip!r}")
        if self.baseline != "mean":
            raise ValueError("only mean baseline imputation is available")


@dataclass
class SelectionEntry:
    iteration: int
    column: int
    cls: str
    params: dict
    score: float | None
    searched: bool

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "column": self.column, "class": self.cls,
                "params": _jsonable(self.params), "score": self.score, "searched": self.searched}


@dataclass
class SelectionLog:
    entries: list = field(default_factory=list)

    def for_column(self, d: int) -> list:
        return [e for e in self.entries if e.column == d]

    def to_json(self) -> list:
        return [e.to_json() for e in self.entries]


@dataclass
class TraceRecord:
    iteration: int
    objective: float | None
    max_norm_change: float | None
    wall_time: float
    searched: bool = False
    rmse: float | None = None
    wd: float | None = None

    def to_json(self, include_time: bool = True) -> dict:
        out = {"iteration": self.iteration, "objective": self.objective,
               "max_norm_change": self.max_norm_change, "searched": self.searched,
               "rmse": self.rmse, "wd": self.wd}
        if include_time:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class ConvergenceTrace:
    records: list = field(default_factory=list)
    stop_reason: str | None = None

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def to_json(self, include_time: bool = True) -> dict:
        return {"stop_reason": self.stop_reason,
                "records": [r.to_json(include_time) for r in self.records]}


@dataclass
class EngineResult:
    imputed: ImputedDataset
    log: SelectionLog
    trace: ConvergenceTrace
    counter: FitCounter

    def __iter__(self):
        return iter((self.imputed, self.log, self.trace))


def _jsonable(params: dict) -> dict:
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in sorted(params.items())}


# --- baseline --------------------------------------------------------------

def baseline_fill(dataset: IncompleteDataset) -> np.ndarray:
    """Column mean (continuous) or mode with ties to the smallest level (categorical)."""
    X = dataset.values.copy()
    for j, kind in enumerate(dataset.kinds):
        obs = dataset.mask[:, j]
        if obs.all():
            continue
        if not obs.any():
            raise ValueError(f"column {j} is fully missing")
        col = dataset.values[obs, j]
        if kind.is_categorical:
            vals, counts = np.unique(col, return_counts=True)
            fill = vals[np.argmax(counts)]
        else:
            fill = col.mean()
        X[~obs, j] = fill
    return X


def baseline_impute(dataset: IncompleteDataset) -> ImputedDataset:
    return ImputedDataset(baseline_fill(dataset), dataset.mask.copy(), dataset.kinds, dataset.names)


# --- stopping and skipping --------------------------------------------------

def patience_streak(trace: ConvergenceTrace) -> int:
    """Number of most recent iterations whose objective did not go below the best before them."""
    best = np.inf
    streak = 0
    for rec in trace.records:
        if rec.iteration == 0 or rec.objective is None:
            continue
        if rec.objective < best:
            best = rec.objective
            streak = 0
        else:
            streak += 1
    return streak


def stop_reason(trace: ConvergenceTrace, config: EngineConfig) -> str | None:
    if not trace.records:
        return None
    last = trace.records[-1]
    if last.iteration >= config.max_outer_iters:
        return "max_iterations"
    if last.iteration > 0 and last.max_norm_change is not None and last.max_norm_change <= config.tol_imp:
        return "tolerance"
    if patience_streak(trace) >= config.objective_patience:
        return "objective_plateau"
    return None


def gamma_should_stop(trace: ConvergenceTrace, config: EngineConfig) -> bool:
    return stop_reason(trace, config) is not None


def sigma_should_skip(log: SelectionLog, d: int, config: EngineConfig) -> bool:
    if config.skip == "never":
        return False
    recent = log.for_column(d)[-config.skip_m:]
    if len(recent) < config.skip_m:
        return False
    first = recent[0]
    return all(e.cls == first.cls and e.params == first.params for e in recent[1:])


# --- the engine ---------------------------------------------------------------

class _Design:
    """Regressor matrix for every column: raw continuous values, one-hot categoricals."""

    def __init__(self, X: np.ndarray, kinds):
        self.kinds = kinds
        self.blocks = [self._block(X[:, j], k) for j, k in enumerate(kinds)]

    @staticmethod
    def _block(col, kind):
        if not kind.is_categorical:
            return col[:, None].copy()
        codes = kind.encode(col)
        out = np.zeros((col.shape[0], kind.cardinality))
        out[np.arange(col.shape[0]), codes] = 1.0
        return out

    def update(self, j: int, col: np.ndarray):
        self.blocks[j] = self._block(col, self.kinds[j])

    def without(self, d: int) -> np.ndarray:
        return np.hstack([b for j, b in enumerate(self.blocks) if j != d])


def task_of(kind) -> Task:
    return L.classification(kind.cardinality) if kind.is_categorical else L.REGRESSION


def _seed(seed: int, *parts: int) -> int:
    """A 52-bit integer seed derived from (seed, parts)."""
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), *map(int, parts)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(12))


def _degenerate(y, task: Task, folds: int) -> bool:
    if y.shape[0] < max(folds, 2):
        return True
    if task.is_classification:
        counts = np.bincount(y.astype(np.int64), minlength=task.n_classes)
        return (counts > 0).sum() < 2 or (counts[counts > 0] < 2).all()
    return np.ptp(y) == 0


class HyperImpute:
    """Stateful single run of the outer loop; use :func:`run_hyperimpute`."""

    def __init__(self, dataset: IncompleteDataset, config: EngineConfig, seed: int = 0,
                 truth=None, initial=None):
        self.ds = dataset
        self.cfg = config
        self.seed = int(seed)
        self.truth = None if truth is None else np.asarray(truth, dtype=np.float64)
        self.mask = dataset.mask
        self.kinds = dataset.kinds
        if initial is None:
            self.X = baseline_fill(dataset)
        else:
            init = np.asarray(initial, dtype=np.float64)
            self.X = np.where(self.mask, dataset.values, init)
        self.design = _Design(self.X, self.kinds)
        self.counter = FitCounter()
        self.log = SelectionLog()
        self.trace = ConvergenceTrace()
        self.fixed: dict[int, LearnerConfig] = {}
        self.scores: dict[int, float] = {}
        self.scalings: dict[str, ResourceScaling] = {}
        obs = self.mask
        sd = np.array([dataset.values[obs[:, j], j].std() if obs[:, j].any() else 1.0
                       for j in range(self.X.shape[1])])
        self.scale = np.where(sd > 0, sd, 1.0)
        cols = dataset.missing_columns()
        if config.visitation == "ascending_missingness":
            cols = sorted(cols, key=lambda j: ((~obs[:, j]).sum(), j))
        self.order = cols

    # -- helpers
    def _targets(self, d):
        obs = self.mask[:, d]
        y = self.X[obs, d]
        kind = self.kinds[d]
        return (kind.encode(y) if kind.is_categorical else y), task_of(kind)

    def _catalogue(self, task: Task) -> tuple:
        ab = self.cfg.ablation
        if not ab.flexible:
            return (L.class_for(ab.restricted_class, task),)
        return L.catalogue_for(task, self.cfg.catalogue)

    def _scaling(self, task: Task, y, Xr) -> ResourceScaling:
        if task.kind not in self.scalings:
            self.scalings[task.kind] = calibrate_resource_scaling(
                self._catalogue(task), task, y, Xr, seed=_seed(self.seed, 0, 0, 99))
        return self.scalings[task.kind]

    def _snapshot(self) -> np.ndarray:
        return self.X[~self.mask].copy()

    def _change(self, before: np.ndarray) -> float:
        after = self.X[~self.mask]
        if after.size == 0:
            return 0.0
        cols = np.nonzero(~self.mask)[1]
        cat = np.array([self.kinds[j].is_categorical for j in range(self.X.shape[1])])[cols]
        diff = np.abs(after - before) / self.scale[cols]
        diff[cat] = (after[cat] != before[cat]).astype(float)
        return float(diff.max())

    def _record(self, it, objective, change, t0, searched):
        rec = TraceRecord(it, objective, change, time.perf_counter() - t0, searched)
        if self.truth is not None and not self.mask.all():
            rec.rmse = rmse_missing(self.X, self.truth, self.mask, self.kinds)
            rec.wd = wasserstein_missing(self.X, self.truth, self.mask, self.kinds)
        self.trace.records.append(rec)

    # -- selection
    def _global_select(self, it: int) -> None:
        """Pick one model for all columns by the summed CV score, then freeze it."""
        cols = [d for d in self.order]
        parts = []
        for d in cols:
            y, task = self._targets(d)
            if _degenerate(y, task, self.cfg.folds):
                continue
            Xr = self.design.without(d)[self.mask[:, d]]
            parts.append((d, y, task, Xr,
                          fold_assignment(y, task, self.cfg.folds, _seed(self.seed, 0, d, 1))))
        if not parts:
            return
        per_column: dict = {}
        reg = [p for p in parts if not p[2].is_classification]
        base_task = reg[0][2] if reg else parts[0][2]

        def evaluate(cfg):
            total = 0.0
            scores = {}
            for d, y, task, Xr, folds_ids in parts:
                c = L.counterpart(cfg, task)
                s = cv_objective(c, task, y, Xr, objective_for(task, self.cfg.folds),
                                 _seed(self.seed, 0, d, 1), self.counter, folds_ids)
                scores[d] = s
                total += s
            per_column[cfg.key()] = scores
            return total

        classes = L.catalogue_for(base_task, self.cfg.catalogue)
        problem = SearchProblem(classes, evaluate, base_task)
        d0, y0, t0_, X0, _ = (reg or parts)[0]
        scaling = self._scaling(base_task, y0, X0) if self.cfg.strategy.kind == "hyperband" else None
        result = run_strategy(self.cfg.strategy, problem, scaling, _seed(self.seed, it, 0, 2))
        for d, y, task, Xr, _ in parts:
            self.fixed[d] = L.counterpart(result.best, task)
            self.scores[d] = per_column[result.best.key()][d]
        self._global_searched = True

    def _select(self, it: int, d: int, y, task: Task, Xr) -> tuple:
        """Return (config, score, searched) for column d at iteration it."""
        cfg, ab = self.cfg, self.cfg.ablation
        if not ab.auto_select and not ab.flexible:
            return L.default_config(L.class_for(ab.restricted_class, task), task), None, False
        if not ab.column_wise:
            searched = it == 1 and getattr(self, "_global_searched", False) and d not in self._announced
            self._announced.add(d)
            return self.fixed[d], self.scores.get(d), searched
        frozen = not ab.adaptive and d in self.fixed
        if frozen or sigma_should_skip(self.log, d, cfg):
            prev = self.fixed[d]
            return prev, self.scores.get(d), False
        # folds and fit seeds stay fixed per column so scores are comparable across iterations
        problem = column_problem(task, y, Xr, self._catalogue(task),
                                 Objective(objective_for(task).kind, cfg.folds),
                                 _seed(self.seed, 0, d, 1), self.counter, incumbent=self.fixed.get(d))
        if not ab.auto_select:
            result = search_naive(problem)
        else:
            scaling = self._scaling(task, y, Xr) if cfg.strategy.kind == "hyperband" else None
            result = run_strategy(cfg.strategy, problem, scaling, _seed(self.seed, it, d, 2))
        self.fixed[d] = result.best
        self.scores[d] = result.best_score
        return result.best, result.best_score, True

    # -- main loop
    def run(self) -> EngineResult:
        t_start = time.perf_counter()
        self._record(0, None, None, t_start, False)
        self._announced = set()
        if not self.order:
            self.trace.stop_reason = "no_missing"
            return self._result()
        it = 0
        while True:
            it += 1
            t0 = time.perf_counter()
            before = self._snapshot()
            searched_any = False
            if not self.cfg.ablation.column_wise and it == 1:
                self._global_select(it)
            for d in self.order:
                searched_any |= self._visit(it, d)
            objective = sum(self.scores.values()) if self.scores else None
            self._record(it, objective, self._change(before), t0, searched_any)
            reason = stop_reason(self.trace, self.cfg)
            if reason:
                self.trace.stop_reason = reason
                break
        return self._result()

    def _visit(self, it: int, d: int) -> bool:
        y, task = self._targets(d)
        obs_rows = np.flatnonzero(self.mask[:, d])
        mis_rows = np.flatnonzero(~self.mask[:, d])
        Xall = self.design.without(d)
        Xr, Xm = Xall[obs_rows], Xall[mis_rows]
        searched = False
        config = L.default_config("constant", task)
        score = None
        if not _degenerate(y, task, self.cfg.folds) and (self.cfg.ablation.column_wise or d in self.fixed):
            try:
                config, score, searched = self._select(it, d, y, task, Xr)
            except (InsufficientData, DegenerateTarget) as exc:
                log.debug("column %d: falling back to constant predictor (%s)", d, exc)
                config, score = L.default_config("constant", task), None
        try:
            model = L.fit(config, task, y, Xr, seed=_seed(self.seed, 0, d, 3),
                          row_ids=obs_rows, counter=self.counter)
        except DegenerateTarget:
            config = L.default_config("constant", task)
            model = L.fit(config, task, y, Xr, counter=self.counter)
        self.counter.refits += 1
        pred = model.predict(Xm)
        kind = self.kinds[d]
        if kind.is_categorical:
            pred = kind.decode(np.argmax(pred, axis=1))
        self.X[mis_rows, d] = pred
        self.design.update(d, self.X[:, d])
        self.log.entries.append(SelectionEntry(it, d, config.cls, dict(config.params), score, searched))
        return searched

    def _result(self) -> EngineResult:
        imputed = ImputedDataset(self.X.copy(), self.mask.copy(), self.kinds, self.ds.names)
        return EngineResult(imputed, self.log, self.trace, self.counter)


def run_hyperimpute(dataset: IncompleteDataset, config: EngineConfig | None = None, seed: int = 0,
                    truth=None, initial=None) -> EngineResult:
    """Impute ``dataset``; returns (imputed, selection log, convergence trace) plus fit counts."""
    return HyperImpute(dataset, config or EngineConfig(), seed, truth, initial).run()


# --- ablation settings ----------------------------------------------------------

def ablation_config(setting: str, learner: str | None = None,
                    base: EngineConfig | None = None) -> EngineConfig:
    """Map a named ablation setting onto engine switches."""
    base = base or EngineConfig()
    if setting == "full":
        ab = Ablation()
    elif setting == "ice_fixed":
        ab = Ablation(column_wise=True, auto_select=False, adaptive=False, flexible=False,
                      restricted_class=learner or "ridge")
    elif setting == "global_search":
        ab = Ablation(column_wise=False, auto_select=True, adaptive=False, flexible=True)
    elif setting == "column_naive":
        ab = Ablation(column_wise=True, auto_select=False, adaptive=False, flexible=True)
    elif setting == "wo_flexibility":
        ab = Ablation(flexible=False, restricted_class=learner or "ridge")
    elif setting == "wo_adaptivity":
        ab = Ablation(adaptive=False)
    else:
        raise ValueError(f"unknown ablation setting {setting!r}; choose from {ABLATIONS}")
    return replace(base, ablation=ab)


def run_ablation(dataset: IncompleteDataset, setting: str, seed: int = 0, learner: str | None = None,
                 base: EngineConfig | None = None, truth=None) -> EngineResult:
    return run_hyperimpute(dataset, ablation_config(setting, learner, base), seed, truth)
