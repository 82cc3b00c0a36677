import json

import numpy as np
import pytest

from hyperimpute.cli import EXIT_DATA, EXIT_OK, EXIT_SPEC, main
from hyperimpute.data import read_csv


@pytest.fixture
def complete_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert main(["make-synth", "--kind", "gaussian", "--n", "80", "--d", "3", "--out", str(path)]) == EXIT_OK
    return path


def test_simulate_and_impute(tmp_path, complete_csv):
    holes = tmp_path / "holes.csv"
    assert main(["simulate", "--data", str(complete_csv), "--mechanism", "MCAR", "--rate", "0.2",
                 "--out", str(holes)]) == EXIT_OK
    ds = read_csv(holes)
    assert ds.n_missing > 0
    out = tmp_path / "imputed.csv"
    assert main(["impute", "--data", str(holes), "--strategy", "naive", "--max-iters", "2",
                 "--truth", str(complete_csv), "--out", str(out)]) == EXIT_OK
    filled = read_csv(out)
    assert filled.n_missing == 0
    assert np.array_equal(filled.values[ds.mask], ds.values[ds.mask])
    trace = json.loads((tmp_path / "imputed.csv.trace.json").read_text())
    assert trace["records"][0]["iteration"] == 0 and trace["records"][0]["rmse"] is not None
    assert json.loads((tmp_path / "imputed.csv.selection.json").read_text())


def test_impute_baseline(tmp_path, complete_csv):
    holes = tmp_path / "holes.csv"
    main(["simulate", "--data", str(complete_csv), "--rate", "0.2", "--out", str(holes)])
    out = tmp_path / "knn.csv"
    assert main(["impute", "--data", str(holes), "--method", "knn:3", "--out", str(out)]) == EXIT_OK
    assert not (tmp_path / "knn.csv.trace.json").exists()


def test_benchmark_and_reports(tmp_path, complete_csv, capsys):
    out = tmp_path / "bench"
    code = main(["benchmark", "--data", str(complete_csv), "--mechanism", "MCAR", "--rate", "0.3",
                 "--seeds", "2", "--methods", "mean,ice_fixed:ridge", "--out", str(out)])
    assert code == EXIT_OK
    assert "ice_fixed:ridge" in capsys.readouterr().out
    report = out / "report.json"
    sel = tmp_path / "sel.csv"
    assert main(["selection-report", "--report", str(report), "--out", str(sel)]) == EXIT_OK
    assert sel.read_text().startswith("iteration,class,frequency")
    conv = tmp_path / "conv.csv"
    gp = tmp_path / "conv.gp"
    assert main(["convergence-report", "--report", str(report), "--out", str(conv),
                 "--gnuplot", str(gp)]) == EXIT_OK
    assert conv.read_text().startswith("run,iter,objective")
    assert "plot" in gp.read_text()


def test_config_file(tmp_path, complete_csv):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(f"dataset: {complete_csv}\nrates: [0.2]\nmethods: [mean]\nn_seeds: 1\n")
    assert main(["benchmark", "--config", str(cfg)]) == EXIT_OK


def test_sweep(tmp_path, complete_csv, capsys):
    assert main(["sweep", "--data", str(complete_csv), "--methods", "mean", "--rate", "0.3",
                 "--seeds", "1", "--axis", "features", "--grid", "2,3"]) == EXIT_OK
    assert "features = 2" in capsys.readouterr().out
    assert main(["sweep", "--data", str(complete_csv), "--methods", "mean", "--seeds", "1",
                 "--axis", "samples", "--grid", "1000"]) == EXIT_SPEC


def test_error_codes(tmp_path, complete_csv):
    assert main(["benchmark", "--data", str(tmp_path / "missing.csv"), "--methods", "mean"]) == EXIT_DATA
    assert main(["benchmark", "--data", str(complete_csv), "--methods", "wizard"]) == EXIT_SPEC
    assert main(["benchmark", "--data", str(complete_csv), "--rate", "abc"]) == EXIT_SPEC
    assert main(["benchmark", "--methods", "mean"]) == EXIT_SPEC
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1,2\n3\n")
    assert main(["simulate", "--data", str(ragged), "--out", str(tmp_path / "x.csv")]) == EXIT_DATA


def test_make_synth_categorical(tmp_path):
    out = tmp_path / "cat.csv"
    assert main(["make-synth", "--kind", "categorical", "--n", "50", "--out", str(out)]) == EXIT_OK
    assert read_csv(out).kinds[2].is_categorical


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
