import json
from pathlib import Path

import pytest

from softmaximin import FistaConfig, NpgConfig, RunConfig, SchemaError, ShapeError
from softmaximin.config import load_schema

BASIS = [{"type": "fourier", "num_basis": 5}]


def test_minimal_config_defaults():
    cfg = RunConfig.from_dict({"zeta": 2.0, "basis": BASIS})
    assert cfg.lambda_count == 10 and cfg.lambda_ratio == 1e-4 and cfg.solver == "npg"
    assert cfg.solver_config() == NpgConfig()


def test_full_config():
    doc = {
        "zeta": 100,
        "lambda_count": 5,
        "lambda_ratio": 0.01,
        "penalty": "l1",
        "basis": [
            {"type": "bspline", "num_basis": 10, "degree": 3, "domain": [1, 25]},
            {"type": "fourier", "num_basis": 7, "period": 2.0},
        ],
        "solver": "fista",
        "fista": {"max_iter": 50, "pair_scale": 0.5},
        "npg": {"M": 2, "L_init_rule": "bb1"},
        "cv": {"block_dims": [5, 3], "repeats": 2, "seed": 4},
        "aggregate": {"lambda": 0.1},
        "seed": 3,
        "threads": 2,
    }
    cfg = RunConfig.from_dict(doc)
    assert cfg.solver_config() == FistaConfig(max_iter=50, pair_scale=0.5)
    D = cfg.design((25, 9))
    assert D.col_dims == (10, 7)
    assert cfg.aggregate_lambda == 0.1


@pytest.mark.parametrize(
    "doc",
    [
        {"basis": BASIS},
        {"zeta": 0, "basis": BASIS},
        {"zeta": 1, "basis": BASIS, "unknown": 1},
        {"zeta": 1, "basis": BASIS, "npg": {"gamma": 1}},
        {"zeta": 1, "basis": [{"type": "wavelet", "num_basis": 3}]},
        {"zeta": 1, "basis": BASIS * 4},
        {"zeta": 1, "basis": BASIS, "solver": "lars"},
        {"zeta": 1, "basis": BASIS, "lambda_ratio": 1.0},
        {"zeta": 1, "basis": BASIS, "npg": {"L_min": 2.0, "L_max": 1.0}},
        {"zeta": 1, "basis": BASIS, "lambdas": [0.1, 0.2]},
        {"zeta": 1, "basis": BASIS, "cv": {"repeats": 3}},
    ],
)
def test_invalid_configs(doc):
    with pytest.raises(SchemaError):
        RunConfig.from_dict(doc)


def test_load_rejects_broken_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{zeta: 1")
    with pytest.raises(SchemaError):
        RunConfig.load(p)


def test_design_dimension_mismatch():
    cfg = RunConfig.from_dict({"zeta": 1, "basis": BASIS})
    with pytest.raises(ShapeError):
        cfg.design((4, 4))


def test_docs_copy_of_schema_is_current():
    docs = Path(__file__).resolve().parents[1] / "docs" / "run_config.schema.json"
    assert json.loads(docs.read_text()) == load_schema()
