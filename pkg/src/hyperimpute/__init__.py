"""Iterative missing-data imputation with per-column automatic model selection."""

from .baselines import (
    BaselineKind, impute_ice_linear, impute_iterative_forest, impute_knn, impute_mean,
    impute_softimpute, softimpute,
)
from .data import (
    ColumnKind, DataError, ImputedDataset, IncompleteDataset, apply_mask, from_array, read_csv,
    write_csv,
)
from .engine import (
    Ablation, ConvergenceTrace, EngineConfig, SelectionLog, ablation_config, baseline_impute,
    run_ablation, run_hyperimpute,
)
from .harness import ExperimentSpec, run_experiment, selection_report, sensitivity_sweep
from .metrics import EvalReport, auroc, evaluate, rmse_missing, wasserstein_missing
from .search import SearchStrategy
from .simulate import MissingnessSpec, simulate

__version__ = "0.1.0"

__all__ = [
    "Ablation", "BaselineKind", "ColumnKind", "ConvergenceTrace", "DataError", "EngineConfig",
    "EvalReport", "ExperimentSpec", "ImputedDataset", "IncompleteDataset", "MissingnessSpec",
    "SearchStrategy", "SelectionLog", "ablation_config", "apply_mask", "auroc", "baseline_impute",
    "evaluate", "from_array", "impute_ice_linear", "impute_iterative_forest", "impute_knn",
    "impute_mean", "impute_softimpute", "read_csv", "rmse_missing", "run_ablation",
    "run_experiment", "run_hyperimpute", "selection_report", "sensitivity_sweep", "simulate",
    "softimpute", "wasserstein_missing", "write_csv",
]
