"""JSON run configuration: schema validation and conversion to solver settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from .basis import BSplineSpec, FourierSpec, bspline_design, fourier_design
from .errors import SchemaError, ShapeError
from .optimizer import FistaConfig, NpgConfig
from .tensor import TensorDesign


def load_schema() -> dict:
    text = resources.files("softmaximin").joinpath("data/run_config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    zeta: float
    basis: tuple
    lambda_count: int = 10
    lambda_ratio: float = 1e-4
    lambdas: Optional[tuple] = None
    penalty: str = "l1"
    solver: str = "npg"
    npg: dict = field(default_factory=dict)
    fista: dict = field(default_factory=dict)
    cv: Optional[dict] = None
    aggregate: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        validator = jsonschema.Draft202012Validator(load_schema())
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            where = "/".join(map(str, e.absolute_path)) or "<root>"
            raise SchemaError(f"config invalid at {where}: {e.message}")
        doc = dict(doc)
        if "lambdas" in doc:
            doc["lambdas"] = tuple(doc["lambdas"])
        doc["basis"] = tuple(dict(b) for b in doc["basis"])
        cfg = cls(**doc)
        # cross-field checks the schema cannot express
        try:
            cfg.solver_config()
        except ValueError as exc:
            raise SchemaError(f"config invalid: {exc}") from exc
        if cfg.lambdas is not None and np.any(np.diff(cfg.lambdas) >= 0):
            raise SchemaError("config invalid: lambdas must be strictly decreasing")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def solver_config(self):
        if self.solver == "fista":
            return FistaConfig(**self.fista)
        return NpgConfig(**self.npg)

    @property
    def aggregate_lambda(self) -> float:
        return float(self.aggregate.get("lambda", 0.0))

    def design(self, grid_dims) -> TensorDesign:
        """Marginal designs on uniform grids of the given extents."""
        if len(grid_dims) != len(self.basis):
            raise ShapeError(f"config has {len(self.basis)} basis entries, data grid is {tuple(grid_dims)}")
        return TensorDesign([marginal_design(b, n) for b, n in zip(self.basis, grid_dims)])


def marginal_design(spec: dict, n: int) -> np.ndarray:
    if spec["type"] == "bspline":
        a, b = spec.get("domain", (0.0, 1.0))
        bs = BSplineSpec(spec["num_basis"], (a, b), spec.get("degree", 3))
        return bspline_design(bs, np.linspace(a, b, n))
    period = spec.get("period", 1.0)
    a, b = spec.get("domain", (0.0, period))
    return fourier_design(FourierSpec(spec["num_basis"], period), np.linspace(a, b, n))
