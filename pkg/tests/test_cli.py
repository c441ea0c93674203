import csv
import json

import numpy as np
import pytest

from softmaximin import read_array, write_array
from softmaximin.cli import main


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _config(path, **doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def sim1d(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    data = d / "y.smma"
    assert main(["simulate", "1d", "--seed", "1", "--groups", "6", "--out", str(data)]) == 0
    return data


SMALL_BASIS = [{"type": "fourier", "num_basis": 25, "period": 1.0}]


def test_simulate_writes_data_truth_and_sidecar(sim1d):
    Y = read_array(sim1d)
    assert Y.shape == (2001, 6)
    assert read_array(str(sim1d) + ".truth").shape == (2001,)
    meta = json.loads(open(str(sim1d) + ".json").read())
    assert meta["grid_dims"] == [2001] and len(meta["index_sets"]) == 6


def test_simulate_is_deterministic(tmp_path, sim1d):
    again = tmp_path / "y.smma"
    assert main(["simulate", "1d", "--seed", "1", "--groups", "6", "--out", str(again)]) == 0
    assert again.read_bytes() == sim1d.read_bytes()


def test_fit_evaluate_pipeline(tmp_path, sim1d, capsys):
    cfg = _config(tmp_path / "c.json", zeta=20, basis=SMALL_BASIS)
    fit = tmp_path / "fit.smma"
    code, out, err = _run(["fit", "--data", sim1d, "--config", cfg, "--out", fit], capsys)
    assert code == 0, err
    summary = json.loads(out)  # stdout is exactly one JSON document
    assert summary["lambdas"] == 10
    assert read_array(fit).shape == (25, 10)
    table = tmp_path / "mse.csv"
    code, out, err = _run(["evaluate", "--fit", fit, "--truth", str(sim1d) + ".truth", "--out", table], capsys)
    assert code == 0, err
    rows = list(csv.DictReader(open(table)))
    assert len(rows) == 10
    assert [int(r["index"]) for r in rows] == list(range(10))
    assert all(float(r["mse"]) >= 0 for r in rows)


def test_fista_and_npg_paths_agree(tmp_path, sim1d, capsys):
    # FISTA with the worst-case constant is very slow here; pair_scale=0 starts
    # from the design part of the bound and doubles on failed upper-model checks
    solvers = {"npg": {"npg": {}}, "fista": {"fista": {"pair_scale": 0.0, "max_iter": 20000}}}
    metas = {}
    for solver, extra in solvers.items():
        cfg = _config(tmp_path / f"{solver}.json", zeta=2, basis=SMALL_BASIS, lambda_count=5, solver=solver, **extra)
        fit = tmp_path / f"{solver}.smma"
        code, _, err = _run(["fit", "--data", sim1d, "--config", cfg, "--out", fit], capsys)
        assert code == 0, err
        metas[solver] = json.loads(open(str(fit) + ".json").read())
    assert all(metas["npg"]["converged"])
    np.testing.assert_allclose(metas["fista"]["objectives"], metas["npg"]["objectives"], rtol=1e-6)


def test_aggregate_and_export(tmp_path, sim1d, capsys):
    cfg = _config(tmp_path / "c.json", zeta=20, basis=SMALL_BASIS)
    for method in ("magging", "mean"):
        out_fit = tmp_path / f"{method}.smma"
        code, _, err = _run(["aggregate", method, "--data", sim1d, "--config", cfg, "--out", out_fit], capsys)
        assert code == 0, err
        assert read_array(out_fit).shape == (25, 1)
    meta = json.loads(open(tmp_path / "magging.smma.json").read())
    assert np.isclose(sum(meta["weights"]), 1.0)
    csv_out = tmp_path / "sig.csv"
    code, _, err = _run(["export-signal", "--fit", tmp_path / "magging.smma", "--out", csv_out], capsys)
    assert code == 0, err
    rows = list(csv.reader(open(csv_out)))
    assert rows[0] == ["x", "value"] and len(rows) == 2002


def test_export_slice_3d(tmp_path, capsys):
    basis = [{"type": "bspline", "num_basis": 4, "domain": [1, 5]}] * 2 + [
        {"type": "bspline", "num_basis": 5, "domain": [1, 7]}
    ]
    fit = tmp_path / "f.smma"
    write_array(fit, np.random.default_rng(0).standard_normal((4, 4, 5, 2)))
    (tmp_path / "f.smma.json").write_text(json.dumps({"lambdas": [1, 0.5], "basis": basis, "grid_dims": [5, 5, 7]}))
    out = tmp_path / "s.csv"
    code, _, err = _run(["export-signal", "--fit", fit, "--slice", "t=3", "--out", out], capsys)
    assert code == 0, err
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["x", "y", "value"] and len(rows) == 26
    code, _, err = _run(["export-signal", "--fit", fit, "--slice", "t=7", "--out", out], capsys)
    assert code == 4


def _error(err):
    return json.loads(err.strip().splitlines()[-1])


def test_bad_magic_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.smma"
    bad.write_bytes(b"JUNK" + bytes(20))
    cfg = _config(tmp_path / "c.json", zeta=1, basis=SMALL_BASIS)
    code, out, err = _run(["fit", "--data", bad, "--config", cfg, "--out", tmp_path / "f"], capsys)
    assert code == 2 and out == ""
    assert _error(err) == {"error": "FormatError", "message": _error(err)["message"], "exit_code": 2}


def test_schema_violation_exits_3(tmp_path, sim1d, capsys):
    cfg = _config(tmp_path / "c.json", zeta=1, basis=SMALL_BASIS, bogus=True)
    code, out, err = _run(["fit", "--data", sim1d, "--config", cfg, "--out", tmp_path / "f"], capsys)
    assert code == 3 and out == ""
    assert _error(err)["error"] == "SchemaError"


def test_shape_mismatch_exits_4(tmp_path, sim1d, capsys):
    cfg = _config(tmp_path / "c.json", zeta=1, basis=SMALL_BASIS * 2)
    code, out, err = _run(["fit", "--data", sim1d, "--config", cfg, "--out", tmp_path / "f"], capsys)
    assert code == 4 and out == ""
    assert _error(err)["exit_code"] == 4


def test_usage_error_exits_1(capsys):
    code, out, err = _run(["frobnicate"], capsys)
    assert code == 1 and out == ""
    assert _error(err)["error"] == "UsageError"
