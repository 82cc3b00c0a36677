"""Seeded experiment runner: simulate, impute, evaluate, aggregate, report.

Every run's seeds are hashed from the experiment's root seed and the run's
coordinates, so reports are a pure function of (dataset, spec) whatever the
worker count or cell order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import BASELINES, BaselineKind, run_baseline
from .data import DataError, IncompleteDataset, apply_mask, read_csv
from .engine import ABLATIONS, EngineConfig, ablation_config, run_hyperimpute
from .metrics import evaluate
from .search import SearchStrategy
from .simulate import MECHANISMS, MissingnessSpec, simulate

log = logging.getLogger(__name__)

DEFAULT_RATES = (0.1, 0.3, 0.5, 0.7)
SWEEP_AXES = ("samples", "features", "rate")


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass(frozen=True)
class Method:
    """A named imputer: ``hyperimpute``, an ablation setting or a baseline.

    ``arg`` carries the learner class of ``ice_fixed``/``wo_flexibility`` and
    the neighbour count of ``knn``.
    """

    name: str
    arg: str | None = None

    @classmethod
    def parse(cls, text: str) -> "Method":
        name, _, arg = text.strip().partition(":")
        m = cls(name, arg or None)
        m.validate()
        return m

    def validate(self):
        known = ("hyperimpute",) + ABLATIONS + BASELINES
        if self.name not in known:
            raise SpecError(f"unknown method {self.name!r}; choose from {known}")
        if self.name in ("ice_fixed", "wo_flexibility") and not self.arg:
            raise SpecError(f"{self.name} needs a learner class, e.g. {self.name}:ridge")

    def __str__(self) -> str:
        return self.name if self.arg is None else f"{self.name}:{self.arg}"


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str = ""
    mechanisms: tuple = ("MCAR",)
    rates: tuple = DEFAULT_RATES
    methods: tuple = ("hyperimpute",)
    n_seeds: int = 10
    out: str | None = None
    root_seed: int = 0
    mar_observed_fraction: float = 0.3
    strategy: str = "hyperband"
    eta: int = 3
    max_resource: int = 27
    n_samples: int = 20
    max_outer_iters: int = 10
    tol_imp: float = 1e-3
    workers: int = 1

    def __post_init__(self):
        if self.n_seeds < 1:
            raise SpecError("n_seeds must be >= 1")
        if not self.mechanisms:
            raise SpecError("at least one mechanism required")
        for mech in self.mechanisms:
            if mech not in MECHANISMS:
                raise SpecError(f"unknown mechanism {mech!r}; choose from {MECHANISMS}")
        if not self.rates or any(not 0 < r < 1 for r in self.rates):
            raise SpecError("rates must lie in (0, 1)")
        if not self.methods:
            raise SpecError("at least one method required")
        for m in self.methods:
            Method.parse(m)
        if self.workers < 1:
            raise SpecError("workers must be >= 1")
        try:
            self.engine_config()
        except ValueError as exc:
            raise SpecError(str(exc)) from None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec keys: {sorted(extra)}")
        d = dict(d)
        for key in ("mechanisms", "rates", "methods"):
            if key in d:
                v = d[key]
                d[key] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        d["rates"] = tuple(float(r) for r in d.get("rates", DEFAULT_RATES))
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("mechanisms", "rates", "methods"):
            d[key] = list(d[key])
        d.pop("out")
        d.pop("workers")
        return d

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            max_outer_iters=self.max_outer_iters, tol_imp=self.tol_imp,
            strategy=SearchStrategy(self.strategy, self.n_samples, self.eta, self.max_resource))


def load_spec(path) -> dict:
    """Read a JSON or YAML experiment file into a plain dict."""
    import yaml

    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path} must hold a key-value mapping")
    return data


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from the string forms of ``parts``."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big") >> 1


# --- a single run --------------------------------------------------------------

def run_method(method: Method, dataset: IncompleteDataset, seed: int, engine: EngineConfig,
               truth=None) -> dict:
    """Impute with one method; returns the imputed dataset plus any log and trace."""
    if method.name in ("hyperimpute", "full"):
        res = run_hyperimpute(dataset, engine, seed, truth)
        return {"imputed": res.imputed, "log": res.log, "trace": res.trace, "counter": res.counter}
    if method.name in ABLATIONS:
        cfg = ablation_config(method.name, method.arg, engine)
        res = run_hyperimpute(dataset, cfg, seed, truth)
        return {"imputed": res.imputed, "log": res.log, "trace": res.trace, "counter": res.counter}
    kind = BaselineKind(method.name, k=int(method.arg)) if method.name == "knn" and method.arg \
        else BaselineKind(method.name)
    return {"imputed": run_baseline(kind, dataset, seed, engine), "log": None, "trace": None,
            "counter": None}


def _run_cell(job) -> dict:
    X, kinds, names, mech, rate, method, run_index, root, frac, engine = job
    mask_seed = derive_seed(root, "mask", mech, rate, run_index)
    seed = derive_seed(root, mech, rate, method, run_index)
    row = {"mechanism": mech, "rate": rate, "method": method, "run_index": run_index,
           "seed": seed, "mask_seed": mask_seed}
    t0 = time.perf_counter()
    try:
        mask = simulate(X, MissingnessSpec(mech, rate, frac, mask_seed))
        if (~mask).all(axis=0).any():
            raise DataError("simulated mask hides a whole column")
        ds = apply_mask(X, mask, kinds, names)
        out = run_method(Method.parse(method), ds, seed, engine, truth=X)
        rep = evaluate(out["imputed"].values, X, mask, kinds)
        row.update(status="ok", rmse=rep.rmse, wd=rep.wd, n_missing=int((~mask).sum()),
                   per_column=rep.to_json()["per_column"],
                   selection_log=out["log"].to_json() if out["log"] is not None else None,
                   trace=out["trace"].to_json(include_time=False) if out["trace"] is not None else None,
                   fits=out["counter"].as_dict() if out["counter"] is not None else None)
    except Exception as exc:  # quarantine: one failing run never aborts the experiment
        log.warning("run %s/%s/%s/%d failed: %s", mech, rate, method, run_index, exc)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["_wall_time"] = time.perf_counter() - t0
    return row


# --- reports ---------------------------------------------------------------------

@dataclass
class ExperimentReport:
    spec: dict
    runs: list
    summary: list
    wall_times: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [r for r in self.runs if r["status"] != "ok"]

    def to_json(self) -> str:
        doc = {"spec": self.spec, "summary": self.summary, "runs": self.runs}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def summary_csv(self) -> str:
        buf = io.StringIO()
        cols = ["mechanism", "rate", "method", "n_runs", "n_failed", "rmse_mean", "rmse_std",
                "wd_mean", "wd_std", "flag"]
        w = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for s in self.summary:
            w.writerow({k: _csv_value(s.get(k)) for k in cols})
        return buf.getvalue()

    def runs_csv(self) -> str:
        buf = io.StringIO()
        cols = ["mechanism", "rate", "method", "run_index", "seed", "mask_seed", "status", "rmse", "wd"]
        w = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in self.runs:
            w.writerow({k: _csv_value(r.get(k)) for k in cols})
        return buf.getvalue()

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "summary.csv").write_text(self.summary_csv())
        (out / "runs.csv").write_text(self.runs_csv())
        (out / "walltime.json").write_text(json.dumps(self.wall_times, indent=1) + "\n")
        return out


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _aggregate(runs: list, spec: ExperimentSpec) -> list:
    cells = defaultdict(list)
    for r in runs:
        cells[(r["mechanism"], r["rate"], r["method"])].append(r)
    summary = []
    for mech in spec.mechanisms:
        for rate in spec.rates:
            for method in spec.methods:
                group = cells[(mech, rate, method)]
                ok = [r for r in group if r["status"] == "ok"]
                entry = {"mechanism": mech, "rate": rate, "method": method, "n_runs": len(group),
                         "n_failed": len(group) - len(ok), "seeds": [r["seed"] for r in group]}
                for metric in ("rmse", "wd"):
                    vals = np.array([r[metric] for r in ok])
                    entry[f"{metric}_mean"] = float(vals.mean()) if vals.size else None
                    entry[f"{metric}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else (
                        0.0 if vals.size == 1 else None)
                flags = []
                if spec.n_seeds == 1:
                    flags.append("single seed")
                if len(ok) < len(group):
                    flags.append("failed runs")
                entry["flag"] = "; ".join(flags)
                summary.append(entry)
    return summary


def load_complete(path) -> tuple:
    """Read a complete CSV (the ground truth); returns (X, kinds, names)."""
    ds = read_csv(path)
    if ds.n_missing:
        raise DataError(f"{path} has {ds.n_missing} missing cells; a complete dataset is required")
    return np.array(ds.values), ds.kinds, ds.names


def run_experiment(spec: ExperimentSpec, data=None) -> ExperimentReport:
    """Run every (mechanism, rate, method, seed) cell and aggregate.

    ``data`` optionally supplies ``(X, kinds, names)`` in place of ``spec.dataset``.
    """
    X, kinds, names = data if data is not None else load_complete(spec.dataset)
    X = np.asarray(X, dtype=np.float64)
    if kinds is None:
        kinds = apply_mask(X, np.ones(X.shape, bool)).kinds
    engine = spec.engine_config()
    jobs = [(X, tuple(kinds), tuple(names), mech, rate, method, i, spec.root_seed,
             spec.mar_observed_fraction, engine)
            for mech in spec.mechanisms for rate in spec.rates
            for method in spec.methods for i in range(spec.n_seeds)]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            runs = list(pool.map(_run_cell, jobs))
    else:
        runs = [_run_cell(j) for j in jobs]
    wall = [{"mechanism": r["mechanism"], "rate": r["rate"], "method": r["method"],
             "run_index": r["run_index"], "wall_time": r.pop("_wall_time")} for r in runs]
    report = ExperimentReport(spec.to_dict(), runs, _aggregate(runs, spec), wall)
    if spec.out:
        report.write(spec.out)
    return report


def sensitivity_sweep(spec: ExperimentSpec, axis: str, grid, data=None) -> dict:
    """Re-run the experiment at each grid point of one axis, others held fixed.

    ``samples`` keeps a seeded random subset of rows, ``features`` keeps the
    leading columns, ``rate`` replaces the rate list with the single value.
    """
    if axis not in SWEEP_AXES:
        raise SpecError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    X, kinds, names = data if data is not None else load_complete(spec.dataset)
    X = np.asarray(X, dtype=np.float64)
    if kinds is None:
        kinds = apply_mask(X, np.ones(X.shape, bool)).kinds
    N, D = X.shape
    names = tuple(names) or tuple(f"x{j}" for j in range(D))
    reports = {}
    for g in grid:
        sub_spec = replace(spec, out=str(Path(spec.out) / f"{axis}_{g}") if spec.out else None)
        if axis == "samples":
            g = int(g)
            if not 2 <= g <= N:
                raise SpecError(f"sample count {g} outside [2, {N}]")
            rows = np.sort(np.random.default_rng(derive_seed(spec.root_seed, "rows")).permutation(N)[:g])
            sub = (X[rows], kinds, names)
        elif axis == "features":
            g = int(g)
            if not 2 <= g <= D:
                raise SpecError(f"feature count {g} outside [2, {D}]")
            sub = (X[:, :g], tuple(kinds)[:g], names[:g])
        else:
            g = float(g)
            if not 0 < g < 1:
                raise SpecError(f"rate {g} outside (0, 1)")
            sub_spec = replace(sub_spec, rates=(g,))
            sub = (X, kinds, names)
        reports[g] = run_experiment(sub_spec, sub)
    return reports


def selection_report(logs, by: str = "iteration") -> dict:
    """Per-stratum class frequencies of selection events.

    ``logs`` is a sequence of ``(label, log)`` pairs, where ``log`` is a
    SelectionLog or its JSON list.  With ``by="iteration"`` the stratum is each
    event's outer iteration; otherwise it is the pair's label (a rate, a
    sample count, ...).
    """
    counts: dict = defaultdict(Counter)
    n_events = 0
    for label, lg in logs:
        entries = lg.to_json() if hasattr(lg, "to_json") else lg
        for e in entries:
            stratum = e["iteration"] if by == "iteration" else label
            counts[stratum][e["class"]] += 1
            n_events += 1
    if n_events == 0:
        raise ValueError("no selection events to tally")
    out = {}
    for stratum in sorted(counts, key=lambda s: (str(type(s)), s)):
        total = sum(counts[stratum].values())
        out[stratum] = {cls: counts[stratum][cls] / total for cls in sorted(counts[stratum])}
    return out


def selection_report_csv(freqs: dict, stratum_name: str = "stratum") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([stratum_name, "class", "frequency"])
    for stratum, row in freqs.items():
        for cls, f in row.items():
            w.writerow([stratum, cls, repr(f)])
    return buf.getvalue()


CONVERGENCE_COLUMNS = ("run", "iter", "objective", "max_norm_change", "rmse", "wd", "wall_time")


def convergence_report(traces) -> str:
    """CSV of objective, change, RMSE and WD per iteration (iteration 0 included).

    ``traces`` is a sequence of ``(label, trace)`` pairs with ConvergenceTrace
    objects or their JSON form.  Unknown values are written as empty cells.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CONVERGENCE_COLUMNS)
    for label, tr in traces:
        records = tr.to_json()["records"] if hasattr(tr, "to_json") else tr["records"]
        for rec in records:
            w.writerow([label, rec["iteration"]] + [
                "" if rec.get(k) is None else repr(float(rec[k]))
                for k in ("objective", "max_norm_change", "rmse", "wd", "wall_time")])
    return buf.getvalue()


def gnuplot_script(csv_path: str, y: str = "objective", out_png: str = "convergence.png") -> str:
    """A gnuplot script plotting ``y`` against iteration, one line per run."""
    if y not in CONVERGENCE_COLUMNS[2:]:
        raise ValueError(f"y must be one of {CONVERGENCE_COLUMNS[2:]}")
    col = CONVERGENCE_COLUMNS.index(y) + 1
    return "\n".join([
        "set datafile separator ','",
        "set terminal pngcairo size 800,500",
        f"set output '{out_png}'",
        "set xlabel 'iteration'",
        f"set ylabel '{y}'",
        "set key off",
        f"plot '{csv_path}' every ::1 using 2:{col} with linespoints",
        "",
    ])


def top_down_runs(catalogue_size: int, n_missing_columns: int) -> int:
    """Full imputation runs an outside-in search over per-column classes would need."""
    return int(catalogue_size) ** int(n_missing_columns)
