"""Baseline estimators: per-group fits, magging and mean aggregation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ShapeError
from .loss import GroupedDataset, SoftMaximinProblem
from .optimizer import FistaConfig, NpgConfig, Solution, fista_solve, npg_solve


@dataclass
class GroupEstimates:
    betas: list
    lam: float
    solutions: list

    def __post_init__(self):
        shapes = {np.shape(b) for b in self.betas}
        if len(shapes) > 1:
            raise ShapeError(f"group estimates have differing shapes {shapes}")

    def __len__(self):
        return len(self.betas)


def _full_column_rank(data: GroupedDataset) -> bool:
    if data.shared_design:
        mats = data.design.factors
    else:
        mats = data.designs
    return all(np.linalg.matrix_rank(m) == m.shape[1] for m in mats)


def _fit_one(data: GroupedDataset, g: int, lam: float, config) -> Solution:
    one = data.group(g)
    problem = SoftMaximinProblem(one, 1.0, lam)
    if one.shared_design and not isinstance(config, NpgConfig):
        return fista_solve(problem, config)
    return npg_solve(problem, config if isinstance(config, NpgConfig) else None)


def fit_groups(data: GroupedDataset, lam: float, config=None, threads: int = 1) -> GroupEstimates:
    """l1-penalized least squares for each group separately.

    Each group is a one-group soft maximin problem, whose loss is the group's
    own ``-V_g``. Shared designs use FISTA with the exact Lipschitz constant,
    per-group designs (or an explicit :class:`NpgConfig`) use NPG.
    ``lam = 0`` gives the group OLS fits.
    """
    if lam == 0 and not _full_column_rank(data):
        raise CapabilityError("design is rank deficient; group OLS is not unique, use lam > 0")
    gs = range(data.n_groups)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(lambda g: _fit_one(data, g, lam, config), gs))
    else:
        sols = [_fit_one(data, g, lam, config) for g in gs]
    return GroupEstimates([s.beta for s in sols], float(lam), sols)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w : w >= 0, sum(w) = 1}`` by sorting."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    r = np.nonzero(u - css / ks > 0)[0][-1]
    return np.maximum(v - css[r] / (r + 1), 0.0)


def _fitted_gram(est: GroupEstimates, data: GroupedDataset) -> np.ndarray:
    """``H_ij = <Phi beta_i, Phi beta_j>``."""
    B = np.stack([np.asarray(b, dtype=float) for b in est.betas], axis=-1)
    if data.shared_design:
        GB = np.stack([data.gram_apply(b) for b in est.betas], axis=-1)
        return np.tensordot(B, GB, axes=(tuple(range(B.ndim - 1)),) * 2)
    # per-group designs: fitted values live on different grids, use the pooled Gram
    gram = sum(X.T @ X for X in data.designs)
    return B.T @ gram @ B


def magging_weights(H: np.ndarray, max_iter: int = 100_000, tol: float = 1e-10) -> np.ndarray:
    """Minimise ``w' H w`` over the simplex by projected gradient with step ``1/||H||``."""
    G = H.shape[0]
    w = np.full(G, 1.0 / G)
    Lh = float(np.linalg.eigvalsh(H)[-1])
    if Lh <= 0:
        return w
    obj = float(w @ H @ w)
    for _ in range(max_iter):
        w_new = project_simplex(w - (H @ w) / Lh)
        obj_new = float(w_new @ H @ w_new)
        small_obj = abs(obj - obj_new) <= tol * max(abs(obj), np.finfo(float).tiny)
        small_w = np.max(np.abs(w_new - w)) <= tol
        w, obj = w_new, obj_new
        if small_obj and small_w:
            break
    return w


def magging(est: GroupEstimates, data: GroupedDataset, return_weights: bool = False):
    """Maximin aggregation: the minimum-norm convex combination of the fitted signals."""
    H = _fitted_gram(est, data)
    w = magging_weights(H)
    beta = np.tensordot(np.stack(est.betas, axis=-1), w, axes=1)
    return (beta, w) if return_weights else beta


def mean_aggregate(est: GroupEstimates) -> np.ndarray:
    return np.mean(np.stack(est.betas, axis=0), axis=0)
