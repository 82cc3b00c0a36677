"""Command-line interface.

Exit codes: 0 success, 2 invalid specification or arguments, 3 data error,
4 an experiment finished with failed runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import synth
from .data import DataError, apply_mask, read_csv, write_csv, write_kinds_sidecar, write_mask_csv
from .harness import (
    SWEEP_AXES, ExperimentSpec, Method, SpecError, convergence_report, gnuplot_script, load_complete,
    load_spec, run_experiment, run_method, selection_report, selection_report_csv, sensitivity_sweep,
)
from .search import SearchStrategy
from .simulate import MECHANISMS, MissingnessSpec, simulate

EXIT_OK, EXIT_SPEC, EXIT_DATA, EXIT_FAILED = 0, 2, 3, 4

DEFAULT_ABLATIONS = ("full", "ice_fixed:ridge", "ice_fixed:forest", "global_search", "column_naive",
                     "wo_flexibility:forest", "wo_adaptivity")


def _csv_list(text: str) -> list:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _add_search_flags(p):
    p.add_argument("--strategy", choices=("naive", "random", "hyperband"))
    p.add_argument("--eta", type=int)
    p.add_argument("--max-resource", type=int)


def _add_experiment_flags(p, methods=True):
    p.add_argument("--data", help="complete CSV used as ground truth")
    p.add_argument("--config", help="JSON or YAML file with experiment settings")
    p.add_argument("--mechanism", type=_csv_list, help=f"comma list of {', '.join(MECHANISMS)}")
    p.add_argument("--rate", type=_csv_list, help="comma list of missingness rates")
    p.add_argument("--seeds", type=int, help="runs per (mechanism, rate, method)")
    p.add_argument("--root-seed", type=int)
    if methods:
        p.add_argument("--methods", type=_csv_list, help="comma list, e.g. hyperimpute,mean,ice_fixed:ridge")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    _add_search_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperimpute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="hide cells of a complete CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--mechanism", default="MCAR", choices=MECHANISMS)
    p.add_argument("--rate", type=float, default=0.3)
    p.add_argument("--mar-observed-fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="incomplete CSV; the mask goes to <out>.mask.csv")

    p = sub.add_parser("impute", help="impute an incomplete CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="hyperimpute")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--truth", help="optional complete CSV for per-iteration RMSE/WD")
    p.add_argument("--out", required=True, help="imputed CSV; logs go to <out>.selection.json / .trace.json")
    _add_search_flags(p)

    p = sub.add_parser("benchmark", help="seeded multi-method benchmark")
    _add_experiment_flags(p)

    p = sub.add_parser("ablate", help="benchmark the ablation settings")
    _add_experiment_flags(p)

    p = sub.add_parser("sweep", help="sensitivity to sample count, feature count or rate")
    _add_experiment_flags(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--grid", required=True, type=_csv_list)

    p = sub.add_parser("selection-report", help="class selection frequencies from report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--by", default="iteration", choices=("iteration", "rate", "method"))
    p.add_argument("--out", help="CSV path (stdout if omitted)")

    p = sub.add_parser("convergence-report", help="per-iteration trace CSV from report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.add_argument("--gnuplot", help="also write a gnuplot script here")

    p = sub.add_parser("make-synth", help="write a synthetic complete dataset")
    p.add_argument("--kind", default="benchmark", choices=synth.SYNTH_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _spec_from_args(args, default_methods=None) -> ExperimentSpec:
    base = load_spec(args.config) if args.config else {}
    overrides = {
        "dataset": args.data, "mechanisms": args.mechanism, "n_seeds": args.seeds,
        "root_seed": args.root_seed, "workers": args.workers, "out": args.out,
        "strategy": args.strategy, "eta": args.eta, "max_resource": args.max_resource,
        "methods": getattr(args, "methods", None),
    }
    if args.rate is not None:
        try:
            overrides["rates"] = [float(r) for r in args.rate]
        except ValueError:
            raise SpecError(f"bad --rate {args.rate}") from None
    merged = {**base, **{k: v for k, v in overrides.items() if v is not None}}
    if default_methods and "methods" not in merged:
        merged["methods"] = list(default_methods)
    if not merged.get("dataset"):
        raise SpecError("a dataset is required (--data or 'dataset' in --config)")
    return ExperimentSpec.from_dict(merged)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    X, kinds, names = load_complete(args.data)
    mask = simulate(X, MissingnessSpec(args.mechanism, args.rate, args.mar_observed_fraction, args.seed))
    ds = apply_mask(X, mask, kinds, names)
    write_csv(ds, args.out)
    write_kinds_sidecar(ds, args.out + ".kinds.json")
    write_mask_csv(mask, names, args.out + ".mask.csv")
    print(f"wrote {args.out}: {int((~mask).sum())} of {mask.size} cells missing")
    return EXIT_OK


def _cmd_impute(args) -> int:
    ds = read_csv(args.data)
    spec = ExperimentSpec(max_outer_iters=args.max_iters)
    engine = spec.engine_config()
    strat = engine.strategy
    engine = replace(engine, strategy=SearchStrategy(
        args.strategy or strat.kind, strat.n_samples, args.eta or strat.eta,
        args.max_resource or strat.max_resource))
    truth = None
    if args.truth:
        truth = load_complete(args.truth)[0]
        if truth.shape != ds.shape:
            raise DataError(f"truth shape {truth.shape} differs from data {ds.shape}")
    out = run_method(Method.parse(args.method), ds, args.seed, engine, truth)
    write_csv(out["imputed"], args.out, names=ds.names)
    if out["log"] is not None:
        Path(args.out + ".selection.json").write_text(json.dumps(out["log"].to_json(), indent=1) + "\n")
        Path(args.out + ".trace.json").write_text(json.dumps(out["trace"].to_json(), indent=1) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def _finish(report) -> int:
    for row in report.summary:
        rmse = "nan" if row["rmse_mean"] is None else f"{row['rmse_mean']:.4f}"
        wd = "nan" if row["wd_mean"] is None else f"{row['wd_mean']:.4f}"
        print(f"{row['mechanism']:>18} {row['rate']:.2f} {row['method']:<24} rmse {rmse} wd {wd}"
              + (f"  [{row['flag']}]" if row["flag"] else ""))
    return EXIT_FAILED if report.failed else EXIT_OK


def _cmd_benchmark(args, default_methods=None) -> int:
    return _finish(run_experiment(_spec_from_args(args, default_methods)))


def _cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    reports = sensitivity_sweep(spec, args.axis, args.grid)
    code = EXIT_OK
    for g, rep in reports.items():
        print(f"--- {args.axis} = {g}")
        code = max(code, _finish(rep))
    return code


def _load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not a report: {exc}") from None


def _cmd_selection(args) -> int:
    doc = _load_report(args.report)
    logs = [(r[args.by] if args.by != "iteration" else None, r["selection_log"])
            for r in doc["runs"] if r.get("selection_log")]
    if not logs:
        raise DataError("report holds no selection logs")
    _emit(selection_report_csv(selection_report(logs, args.by), args.by), args.out)
    return EXIT_OK


def _cmd_convergence(args) -> int:
    doc = _load_report(args.report)
    traces = [(f"{r['mechanism']}/{r['rate']}/{r['method']}/{r['run_index']}", r["trace"])
              for r in doc["runs"] if r.get("trace")]
    _emit(convergence_report(traces), args.out)
    if args.gnuplot:
        Path(args.gnuplot).write_text(gnuplot_script(args.out or "convergence.csv"))
    return EXIT_OK


def _cmd_make_synth(args) -> int:
    X, kinds = synth.make(args.kind, args.n, args.d, args.seed)
    ds = apply_mask(X, np.ones(X.shape, bool), kinds)
    write_csv(ds, args.out)
    if kinds is not None:
        write_kinds_sidecar(ds, args.out + ".kinds.json")
    print(f"wrote {args.out}: {X.shape[0]} rows, {X.shape[1]} columns")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "simulate": _cmd_simulate, "impute": _cmd_impute, "benchmark": _cmd_benchmark,
        "ablate": lambda a: _cmd_benchmark(a, DEFAULT_ABLATIONS), "sweep": _cmd_sweep,
        "selection-report": _cmd_selection, "convergence-report": _cmd_convergence,
        "make-synth": _cmd_make_synth,
    }
    try:
        return handlers[args.command](args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
