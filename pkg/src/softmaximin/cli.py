"""Command-line front end.

Arrays travel as SMMA files (see :mod:`softmaximin.arrayfile`), metadata as a
JSON sidecar next to each array (``<file>.json``). Logs go to stderr, the
requested summary to stdout. Failures print a JSON object on stderr and exit
with 2 (bad array file), 3 (config schema violation), 4 (shape mismatch) or 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import simgen
from .aggregation import fit_groups, magging, mean_aggregate
from .arrayfile import read_array, write_array
from .config import RunConfig
from .errors import FormatError, SchemaError, ShapeError
from .loss import GroupedDataset
from .optimizer import fit_path
from .tensor import TensorDesign, design_matvec
from .validation import CvConfig, block_cv

log = logging.getLogger("softmaximin")

EXIT_CODES = {FormatError: 2, SchemaError: 3, ShapeError: 4}
AXIS_NAMES = ("x", "y", "t")

SIM_BASIS = {
    "1d": [{"type": "fourier", "num_basis": 101, "period": 1.0}],
    "3d": [
        {"type": "bspline", "num_basis": 10, "degree": 3, "domain": [1, 25]},
        {"type": "bspline", "num_basis": 10, "degree": 3, "domain": [1, 25]},
        {"type": "bspline", "num_basis": 20, "degree": 3, "domain": [1, 101]},
    ],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def sidecar(path) -> Path:
    return Path(str(path) + ".json")


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise FormatError(f"missing sidecar {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"sidecar {path} is not valid JSON: {exc}") from exc


def _load_data(path, cfg: RunConfig) -> GroupedDataset:
    Y = read_array(path)
    if Y.ndim != len(cfg.basis) + 1:
        raise ShapeError(
            f"data {path} has dims {Y.shape}; config expects {len(cfg.basis)} grid axes plus a group axis"
        )
    return GroupedDataset(cfg.design(Y.shape[:-1]), Y)


def _fit_design(meta) -> TensorDesign:
    cfg = RunConfig.from_dict({"zeta": 1.0, "basis": meta["basis"]})
    return cfg.design(meta["grid_dims"])


def cmd_simulate(args):
    gen = simgen.gen_1d if args.kind == "1d" else simgen.gen_3d
    data, truth = gen(args.seed, G=args.groups)
    truth_path = args.truth or str(args.out) + ".truth"
    write_array(args.out, data.responses)
    write_array(truth_path, truth.signal)
    meta = {
        "kind": f"simulation-{args.kind}",
        "seed": args.seed,
        "groups": data.n_groups,
        "grid_dims": list(data.design.row_dims),
        "basis": SIM_BASIS[args.kind],
        "truth": str(truth_path),
        "index_sets": [list(map(int, J)) for J in truth.index_sets],
        "phases": truth.phases.tolist(),
    }
    _write_json(sidecar(args.out), meta)
    log.info("wrote %s (%s) and truth %s", args.out, "x".join(map(str, data.responses.shape)), truth_path)
    return {"data": str(args.out), "truth": str(truth_path), "dims": list(data.responses.shape)}


def cmd_fit(args):
    cfg = RunConfig.load(args.config)
    data = _load_data(args.data, cfg)
    log.info("fitting %d lambdas, zeta=%g, solver=%s", cfg.lambda_count, cfg.zeta, cfg.solver)
    fit = fit_path(
        data,
        cfg.zeta,
        cfg.lambdas,
        lambda_count=cfg.lambda_count,
        lambda_ratio=cfg.lambda_ratio,
        penalty=cfg.penalty,
        solver=cfg.solver,
        config=cfg.solver_config(),
    )
    write_array(args.out, fit.coefs)
    meta = {
        "kind": "path",
        "zeta": cfg.zeta,
        "solver": fit.solver,
        "penalty": fit.penalty,
        "lambdas": fit.lambdas.tolist(),
        "objectives": fit.objectives.tolist(),
        "iterations": fit.iterations.tolist(),
        "backtracks": fit.backtracks.tolist(),
        "kkt": fit.kkt.tolist(),
        "converged": fit.converged.tolist(),
        "basis": list(cfg.basis),
        "grid_dims": list(data.design.row_dims),
    }
    _write_json(sidecar(args.out), meta)
    return {"fit": str(args.out), "lambdas": len(fit.lambdas), "converged": int(np.sum(fit.converged))}


def cmd_cv(args):
    cfg = RunConfig.load(args.config)
    if cfg.cv is None:
        raise SchemaError("config invalid: the cv command needs a 'cv' section")
    data = _load_data(args.data, cfg)
    cv = CvConfig(
        block_dims=tuple(cfg.cv["block_dims"]),
        zeta=cfg.zeta,
        repeats=cfg.cv.get("repeats", 10),
        seed=cfg.cv.get("seed", cfg.seed),
        lambdas=cfg.lambdas,
        lambda_count=cfg.lambda_count,
        lambda_ratio=cfg.lambda_ratio,
        penalty=cfg.penalty,
        solver=cfg.solver,
        solver_config=cfg.solver_config(),
        threads=cfg.threads,
    )
    report = block_cv(data, cv)
    _write_json(args.out, report.to_dict())
    return {"report": str(args.out), "selected": report.selected}


def cmd_aggregate(args):
    cfg = RunConfig.load(args.config)
    data = _load_data(args.data, cfg)
    lam = cfg.aggregate_lambda
    est = fit_groups(data, lam, cfg.solver_config(), threads=cfg.threads)
    meta = {"kind": args.method, "lambdas": [lam], "basis": list(cfg.basis), "grid_dims": list(data.design.row_dims)}
    if args.method == "magging":
        beta, w = magging(est, data, return_weights=True)
        meta["weights"] = w.tolist()
    else:
        beta = mean_aggregate(est)
    write_array(args.out, beta[..., None])
    _write_json(sidecar(args.out), meta)
    return {"fit": str(args.out), "method": args.method, "lambda": lam}


def cmd_evaluate(args):
    meta = _read_json(sidecar(args.fit))
    coefs = read_array(args.fit)
    truth = read_array(args.truth)
    if list(truth.shape) != list(meta["grid_dims"]):
        raise ShapeError(f"truth dims {truth.shape} differ from the fit grid {tuple(meta['grid_dims'])}")
    design = _fit_design(meta)
    if coefs.shape[:-1] != design.col_dims:
        raise ShapeError(f"coefficients {coefs.shape[:-1]} do not match the basis {design.col_dims}")
    rows = []
    for k, lam in enumerate(meta["lambdas"]):
        fitted = design_matvec(design, coefs[..., k])
        rows.append((k, lam, float(np.mean((fitted - truth) ** 2))))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lambda", "mse"])
        for k, lam, mse in rows:
            w.writerow([k, repr(float(lam)), repr(mse)])
    best = min(rows, key=lambda r: r[2])
    return {"table": str(args.out), "rows": len(rows), "best_index": best[0], "best_mse": best[2]}


def _parse_slice(text, ndim):
    if text is None:
        return None
    try:
        name, value = text.split("=")
        axis = AXIS_NAMES.index(name.strip())
        index = int(value)
    except ValueError as exc:
        raise UsageError(f"--slice expects AXIS=INDEX with AXIS in {AXIS_NAMES[:ndim]}, got {text!r}") from exc
    if axis >= ndim:
        raise ShapeError(f"axis {name!r} does not exist on a {ndim}-dimensional grid")
    return axis, index


def cmd_export_signal(args):
    meta = _read_json(sidecar(args.fit))
    coefs = read_array(args.fit)
    design = _fit_design(meta)
    if coefs.shape[:-1] != design.col_dims:
        raise ShapeError(f"coefficients {coefs.shape[:-1]} do not match the basis {design.col_dims}")
    k = coefs.shape[-1] - 1 if args.index is None else args.index
    if not 0 <= k < coefs.shape[-1]:
        raise ShapeError(f"fit index {k} out of range for {coefs.shape[-1]} fits")
    signal = design_matvec(design, coefs[..., k])
    names = list(AXIS_NAMES[: signal.ndim])
    sl = _parse_slice(args.slice, signal.ndim)
    if sl is not None:
        axis, index = sl
        if not 0 <= index < signal.shape[axis]:
            raise ShapeError(f"slice {args.slice} outside extent {signal.shape[axis]}")
        signal = np.take(signal, index, axis=axis)
        names.pop(axis)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["value"])
        # first axis fastest, matching the array file layout
        for idx in np.ndindex(*signal.shape[::-1]):
            idx = idx[::-1]
            w.writerow(list(idx) + [repr(float(signal[idx]))])
    return {"csv": str(args.out), "index": k, "cells": int(signal.size)}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="softmaximin", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a simulated grouped data set")
    s.add_argument("kind", choices=["1d", "3d"])
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="where to write the common signal (default OUT.truth)")
    s.add_argument("--groups", type=int, default=simgen.N_GROUPS)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="soft maximin lambda path")
    s.add_argument("--data", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("cv", help="block hold-out validation over the lambda path")
    s.add_argument("--data", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cv)

    s = sub.add_parser("aggregate", help="magging or mean aggregation of per-group fits")
    s.add_argument("method", choices=["magging", "mean"])
    s.add_argument("--data", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("evaluate", help="per-lambda MSE against a known signal")
    s.add_argument("--fit", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("export-signal", help="fitted signal, optionally one slice, as CSV")
    s.add_argument("--fit", required=True)
    s.add_argument("--slice", help="AXIS=INDEX with AXIS in x, y, t; INDEX starts at 0")
    s.add_argument("--index", type=int, help="which fit of the path (default: last)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_signal)
    return p


def _exit_code(exc) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.DEBUG)
        summary = args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        log.debug("command failed", exc_info=True)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(err), file=sys.stderr)
        return code
    print(json.dumps(summary))
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
