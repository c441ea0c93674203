"""Explained variances, the soft maximin loss and its derivatives.

Group losses are ``h_g(beta) = -V_g(beta)`` with

    V_g(beta) = (2 beta' X_g' y_g - beta' X_g' X_g beta) / n_g

and the soft maximin loss is ``lse_zeta(h(beta))``. In the shared-design
(tensor) mode ``X_g' X_g`` does not depend on ``g``, so one application of
``X'X`` per evaluation serves every group and ``X_g' y_g`` is cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapabilityError, NumericalError, PreconditionError, ShapeError
from .tensor import (
    TensorDesign,
    apply_factors,
    design_matvec,
    design_tmatvec,
    gram_spectral_norm,
    vec,
)

HESSIAN_MAX_P = 200


def _box_of(mask: np.ndarray):
    """Slices of the bounding box of True cells if they fill it exactly, else None."""
    idx = np.nonzero(mask)
    if idx[0].size == 0:
        return None
    box = tuple(slice(int(i.min()), int(i.max()) + 1) for i in idx)
    if idx[0].size == int(np.prod([s.stop - s.start for s in box])):
        return box
    return None


class _GramOperator:
    """Applies ``Phi' W Phi`` for a 0/1 cell mask ``W``.

    Masks that keep or drop a single axis-aligned box stay Kronecker
    structured: ``Phi' W Phi`` is a Kronecker product, or a difference of two.
    Any other mask goes through the design and back.
    """

    def __init__(self, design: TensorDesign, mask):
        self.design = design
        self.mask = mask
        self.full = [f.T @ f for f in design.factors]
        self.keep = self.drop = None
        if mask is None:
            return
        box = _box_of(mask)
        if box is not None:
            self.keep = [f[s].T @ f[s] for f, s in zip(design.factors, box)]
            return
        box = _box_of(~mask)
        if box is not None:
            self.drop = [f[s].T @ f[s] for f, s in zip(design.factors, box)]

    def __call__(self, beta: np.ndarray) -> np.ndarray:
        if self.mask is None:
            return apply_factors(self.full, beta)
        if self.keep is not None:
            return apply_factors(self.keep, beta)
        if self.drop is not None:
            return apply_factors(self.full, beta) - apply_factors(self.drop, beta)
        return design_tmatvec(self.design, self.mask * design_matvec(self.design, beta))


class GroupedDataset:
    """Responses from G groups together with their design.

    Two layouts are supported.

    * Shared design: ``GroupedDataset(design, Y)`` with a :class:`TensorDesign`
      and ``Y`` of shape ``(n_1, ..., n_d, G)``. An optional boolean `mask`
      over the grid drops cells from every group (used for hold-out fits).
    * Per-group dense designs: ``GroupedDataset.from_groups(Xs, ys)``.
    """

    def __init__(self, design: TensorDesign, responses, mask=None):
        Y = np.asarray(responses, dtype=float)
        if Y.shape[:-1] != design.row_dims or Y.ndim != design.ndim + 1:
            raise ShapeError(
                f"responses of shape {Y.shape} do not match design rows {design.row_dims} + (G,)"
            )
        if Y.shape[-1] < 1:
            raise PreconditionError("need at least one group")
        if not np.all(np.isfinite(Y)):
            raise NumericalError("responses contain non-finite values")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != design.row_dims:
                raise ShapeError(f"mask shape {mask.shape} != grid {design.row_dims}")
            if mask.all():
                mask = None
            elif not mask.any():
                raise PreconditionError("mask selects no observations")
        self.design = design
        self.responses = Y
        self.mask = mask
        self.designs = None
        self.n_groups = Y.shape[-1]
        self.coef_shape = design.col_dims
        n = design.n if mask is None else int(mask.sum())
        self.group_sizes = np.full(self.n_groups, n, dtype=np.int64)
        Yw = Y if mask is None else Y * mask[..., None]
        self._xty = apply_factors([f.T for f in design.factors], Yw)
        self._yw = Yw
        self._gram = _GramOperator(design, mask)

    @classmethod
    def from_groups(cls, designs: Sequence, responses: Sequence) -> "GroupedDataset":
        if len(designs) != len(responses) or len(designs) < 1:
            raise ShapeError("need one design matrix per response vector and at least one group")
        xs, ys = [], []
        p = None
        for g, (X, y) in enumerate(zip(designs, responses)):
            X = np.asarray(X, dtype=float)
            y = np.asarray(y, dtype=float).ravel()
            if X.ndim != 2 or X.shape[0] != y.size:
                raise ShapeError(f"group {g}: design {X.shape} vs response length {y.size}")
            if p is None:
                p = X.shape[1]
            elif X.shape[1] != p:
                raise ShapeError(f"group {g}: {X.shape[1]} columns, expected {p}")
            if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
                raise NumericalError(f"group {g} contains non-finite values")
            xs.append(X)
            ys.append(y)
        self = cls.__new__(cls)
        self.design = None
        self.responses = ys
        self.mask = None
        self.designs = xs
        self.n_groups = len(xs)
        self.coef_shape = (p,)
        self.group_sizes = np.array([y.size for y in ys], dtype=np.int64)
        self._xty = np.stack([X.T @ y for X, y in zip(xs, ys)], axis=-1)
        return self

    @property
    def shared_design(self) -> bool:
        return self.design is not None

    def with_mask(self, mask) -> "GroupedDataset":
        if not self.shared_design:
            raise CapabilityError("masks need a shared grid design")
        return GroupedDataset(self.design, self.responses, mask)

    def group(self, g: int) -> "GroupedDataset":
        """Single-group dataset for group `g`."""
        if self.shared_design:
            return GroupedDataset(self.design, self.responses[..., g : g + 1], self.mask)
        return GroupedDataset.from_groups([self.designs[g]], [self.responses[g]])

    def check_beta(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != tuple(self.coef_shape):
            raise ShapeError(f"coefficients of shape {beta.shape}, expected {tuple(self.coef_shape)}")
        return beta

    def gram_apply(self, beta: np.ndarray) -> np.ndarray:
        """``X' W X beta`` (shared design only)."""
        return self._gram(beta)

    def quadratic_terms(self, beta: np.ndarray):
        """Return ``lin_g = beta' X_g' y_g``, ``quad_g = beta' X_g' X_g beta`` and ``X_g' X_g beta``.

        In the shared mode the last item is a single array; otherwise it has a
        trailing group axis.
        """
        if self.shared_design:
            gb = self._gram(beta)
            quad = float(np.vdot(beta, gb))
            lin = np.tensordot(beta, self._xty, axes=beta.ndim)
            return lin, np.full(self.n_groups, quad), gb
        gbs = np.stack([X.T @ (X @ beta) for X in self.designs], axis=-1)
        quad = beta @ gbs
        lin = beta @ self._xty
        return lin, quad, gbs

    def pairwise_sq_distance_sum(self) -> float:
        """``sum_{i<j} ||y_i - y_j||^2`` over observed cells, in O(G n)."""
        if not self.shared_design:
            raise CapabilityError("pairwise response distances need a shared design")
        Yw = self._yw.reshape(-1, self.n_groups)
        total = self.n_groups * float(np.sum(Yw * Yw)) - float(np.sum(Yw.sum(axis=1) ** 2))
        return max(total, 0.0)


PENALTIES = ("l1", "none")


@dataclass(frozen=True)
class SoftMaximinProblem:
    """``min_beta lse_zeta(h(beta)) + lam * J(beta)``."""

    data: GroupedDataset
    zeta: float
    lam: float = 0.0
    penalty: str = "l1"

    def __post_init__(self):
        if not self.zeta > 0:
            raise PreconditionError(f"zeta must be positive, got {self.zeta}")
        if not self.lam >= 0:
            raise PreconditionError(f"lambda must be non-negative, got {self.lam}")
        if self.penalty not in PENALTIES:
            raise PreconditionError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")

    @property
    def penalty_weight(self) -> float:
        return self.lam if self.penalty == "l1" else 0.0

    def with_lambda(self, lam: float) -> "SoftMaximinProblem":
        return SoftMaximinProblem(self.data, self.zeta, lam, self.penalty)

    def penalty_value(self, beta) -> float:
        return self.penalty_weight * float(np.abs(beta).sum())

    def objective(self, beta) -> float:
        return softmaximin_loss(self, beta) + self.penalty_value(beta)


def _shifted_exp(x, zeta: float):
    """Largest ``zeta * x`` entry's x and ``exp(zeta * (x - that x))`` (all <= 1)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise NumericalError("lse: NaN in input")
    top = x.max() if zeta > 0 else x.min()
    return top, np.exp(zeta * (x - top))


def lse(x, zeta: float) -> float:
    """``log(sum_g exp(zeta * x_g)) / zeta``, shifted by the dominant entry.

    The shift keeps every exponent non-positive, so the result is finite for
    any finite input and equals ``x_1`` exactly when there is one group.
    """
    if zeta == 0:
        raise PreconditionError("zeta must be nonzero")
    top, e = _shifted_exp(x, zeta)
    return float(top + np.log(e.sum()) / zeta)


def softmax_weights(h, zeta: float) -> np.ndarray:
    """``w_g = exp(zeta h_g - zeta lse_zeta(h))``; non-negative and summing to one."""
    if zeta == 0:
        raise PreconditionError("zeta must be nonzero")
    _, e = _shifted_exp(h, zeta)
    return e / e.sum()


def explained_variance(data: GroupedDataset, g: int, beta) -> float:
    beta = data.check_beta(beta)
    if not 0 <= g < data.n_groups:
        raise PreconditionError(f"group index {g} out of range for {data.n_groups} groups")
    lin, quad, _ = data.quadratic_terms(beta)
    return float((2.0 * lin[g] - quad[g]) / data.group_sizes[g])


def group_losses(data: GroupedDataset, beta) -> np.ndarray:
    """Vector ``h`` with ``h_g = -V_g(beta)``."""
    beta = data.check_beta(beta)
    lin, quad, _ = data.quadratic_terms(beta)
    return (quad - 2.0 * lin) / data.group_sizes


class SmoothEval(NamedTuple):
    value: float
    h: np.ndarray
    weights: np.ndarray
    grad: np.ndarray


def evaluate(data: GroupedDataset, zeta: float, beta: np.ndarray) -> SmoothEval:
    """Loss, group losses, weights and gradient from one pass over the data."""
    return evaluate_terms(data, zeta, *data.quadratic_terms(beta))


def evaluate_terms(data: GroupedDataset, zeta: float, lin, quad, gb) -> SmoothEval:
    n = data.group_sizes
    h = (quad - 2.0 * lin) / n
    if not np.all(np.isfinite(h)):
        raise NumericalError("non-finite group loss")
    value = lse(h, zeta)
    w = softmax_weights(h, zeta)
    c = w / n
    if data.shared_design:
        grad = 2.0 * (c.sum() * gb - data._xty @ c)
    else:
        grad = 2.0 * (gb - data._xty) @ c
    return SmoothEval(value, h, w, grad)


def softmaximin_loss(problem: SoftMaximinProblem, beta) -> float:
    return lse(group_losses(problem.data, beta), problem.zeta)


def softmaximin_gradient(problem: SoftMaximinProblem, beta) -> np.ndarray:
    """``sum_g w_g grad h_g`` with ``grad h_g = -2 X_g'(y_g - X_g beta) / n_g``."""
    beta = problem.data.check_beta(beta)
    return evaluate(problem.data, problem.zeta, beta).grad


def _group_gradients(data: GroupedDataset, beta) -> np.ndarray:
    """Column g is ``vec(grad h_g)``."""
    lin, quad, gb = data.quadratic_terms(beta)
    p = int(np.prod(data.coef_shape))
    xty = data._xty.reshape(p, data.n_groups, order="F")
    if data.shared_design:
        gb = vec(gb)[:, None]
    else:
        gb = gb.reshape(p, data.n_groups, order="F")
    return 2.0 * (gb - xty) / data.group_sizes


def _group_hessians(data: GroupedDataset) -> list:
    p = int(np.prod(data.coef_shape))
    if data.shared_design:
        eye = np.eye(p)
        cols = [vec(data.gram_apply(eye[:, k].reshape(data.coef_shape, order="F"))) for k in range(p)]
        H = 2.0 * np.column_stack(cols) / data.group_sizes[0]
        return [H] * data.n_groups
    return [2.0 * X.T @ X / n for X, n in zip(data.designs, data.group_sizes)]


def softmaximin_hessian(problem: SoftMaximinProblem, beta) -> np.ndarray:
    """Dense Hessian of the soft maximin loss (column-major vec ordering).

    ``zeta * sum_{i<j} w_i w_j (grad h_i - grad h_j)(grad h_i - grad h_j)'
    + sum_g w_g hess h_g``. Only for ``p <= 200``.
    """
    data = problem.data
    beta = data.check_beta(beta)
    p = int(np.prod(data.coef_shape))
    if p > HESSIAN_MAX_P:
        raise CapabilityError(f"dense Hessian limited to p <= {HESSIAN_MAX_P}, got p = {p}")
    w = softmax_weights(group_losses(data, beta), problem.zeta)
    D = _group_gradients(data, beta)
    H = np.zeros((p, p))
    for i in range(data.n_groups - 1):
        diff = D[:, i : i + 1] - D[:, i + 1 :]
        H += (diff * (w[i] * w[i + 1 :])) @ diff.T
    H *= problem.zeta
    for wg, Hg in zip(w, _group_hessians(data)):
        H += wg * Hg
    return H


def lipschitz_bound(data: GroupedDataset, zeta: float, pair_scale: float = 1.0) -> float:
    """Global Lipschitz constant bound for the soft maximin gradient.

    ``L * (1 + pair_scale * zeta * (2 / n) * sum_{i<j} ||y_i - y_j||^2)`` with
    ``L = 2 ||X'X|| / n``. With ``pair_scale = 1`` this is a proven bound;
    smaller values give an optimistic step size that callers must monitor.
    """
    if not data.shared_design:
        raise CapabilityError("the Lipschitz bound needs one design shared by all groups")
    if not zeta > 0:
        raise PreconditionError(f"zeta must be positive, got {zeta}")
    n = float(data.group_sizes[0])
    L = 2.0 * gram_spectral_norm(data.design) / n
    return L * (1.0 + pair_scale * zeta * (2.0 / n) * data.pairwise_sq_distance_sum())
