"""Kronecker-structured design kernels.

A tensor design stores the marginal matrices ``Phi_1, ..., Phi_d`` and acts as
``Phi = Phi_d (x) ... (x) Phi_1`` on coefficient arrays of shape
``(p_1, ..., p_d)``. Flattening is column-major (first index fastest), so
``vec(A) = A.ravel(order="F")`` is consistent with that Kronecker order.

Nothing here ever forms the ``n x p`` matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, PreconditionError, ShapeError

MAX_DIM = 3


def vec(a: np.ndarray) -> np.ndarray:
    """Column-major flattening."""
    return np.asarray(a).ravel(order="F")


def unvec(v: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    return np.asarray(v).reshape(tuple(dims), order="F")


def rho(M: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Rotated H-transform.

    Contracts the first axis of `A` with the columns of `M` and moves the new
    axis to the end, so for ``A`` of shape ``(q, r_2, ..., r_d)`` the result
    has shape ``(r_2, ..., r_d, n)`` with entries
    ``sum_k M[i, k] * A[k, j_2, ..., j_d]``.

    Applying it once per marginal matrix cycles every axis back into place,
    which is how a Kronecker product acts on an array without being formed.
    """
    M = np.asarray(M, dtype=float)
    A = np.asarray(A, dtype=float)
    if M.ndim != 2:
        raise ShapeError(f"rho expects a matrix, got an array with {M.ndim} dims")
    if A.ndim == 0 or A.shape[0] != M.shape[1]:
        first = A.shape[0] if A.ndim else None
        raise ShapeError(
            f"rho: first extent of array ({first}) != matrix columns ({M.shape[1]})"
        )
    if A.ndim == 1:
        return M @ A
    return np.tensordot(A, M, axes=(0, 1))


@dataclass(frozen=True)
class TensorDesign:
    """Marginal design matrices ``[Phi_1, ..., Phi_d]``, ``Phi_j`` of shape ``n_j x p_j``."""

    factors: tuple

    def __init__(self, factors):
        mats = []
        for j, f in enumerate(factors):
            m = np.array(f, dtype=float, order="F")
            if m.ndim != 2 or min(m.shape) < 1:
                raise ShapeError(f"factor {j} must be a non-empty matrix, got shape {m.shape}")
            m.setflags(write=False)
            mats.append(m)
        if not 1 <= len(mats) <= MAX_DIM:
            raise PreconditionError(f"need 1 to {MAX_DIM} factors, got {len(mats)}")
        object.__setattr__(self, "factors", tuple(mats))

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def row_dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def col_dims(self) -> tuple:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def n(self) -> int:
        return int(np.prod(self.row_dims))

    @property
    def p(self) -> int:
        return int(np.prod(self.col_dims))

    def transpose(self) -> "TensorDesign":
        return TensorDesign([f.T for f in self.factors])

    def gram(self) -> "TensorDesign":
        """The design whose factors are ``Phi_j^T Phi_j``; it applies ``Phi^T Phi``."""
        return TensorDesign([f.T @ f for f in self.factors])

    def dense(self) -> np.ndarray:
        """Materialise ``Phi``. Only meant for small problems and diagnostics."""
        out = np.ones((1, 1))
        for f in self.factors:
            out = np.kron(f, out)
        return out


def apply_factors(factors: Sequence[np.ndarray], A: np.ndarray) -> np.ndarray:
    """Nested rho over `factors`; trailing axes of `A` beyond ``len(factors)`` ride along."""
    d = len(factors)
    extra = A.ndim - d
    out = A
    for M in factors:
        out = rho(M, out)
    if extra:
        out = np.moveaxis(out, tuple(range(extra)), tuple(range(d, d + extra)))
    return out


def _check_dims(got, want, what):
    if tuple(got) != tuple(want):
        raise ShapeError(f"{what}: array dims {tuple(got)} do not match design dims {tuple(want)}")


def design_matvec(D: TensorDesign, theta: np.ndarray) -> np.ndarray:
    """``Phi vec(theta)`` reshaped to ``(n_1, ..., n_d)``."""
    theta = np.asarray(theta, dtype=float)
    _check_dims(theta.shape, D.col_dims, "design_matvec")
    return apply_factors(D.factors, theta)


def design_tmatvec(D: TensorDesign, r: np.ndarray) -> np.ndarray:
    """``Phi^T vec(r)`` reshaped to ``(p_1, ..., p_d)``."""
    r = np.asarray(r, dtype=float)
    _check_dims(r.shape, D.row_dims, "design_tmatvec")
    return apply_factors([f.T for f in D.factors], r)


def _largest_eigenvalue(S: np.ndarray, tol: float, max_iter: int) -> float:
    # power iteration on a symmetric PSD matrix, fixed start for reproducibility
    v = np.random.default_rng(0).standard_normal(S.shape[0])
    v /= np.linalg.norm(v)
    mu = float(v @ S @ v)
    for it in range(max_iter):
        w = S @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        mu_new = float(v @ S @ v)
        if abs(mu_new - mu) <= tol * abs(mu_new):
            return mu_new
        mu = mu_new
    raise NumericalError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last estimate {mu_new!r}, previous {mu!r})"
    )


def gram_spectral_norm(D: TensorDesign, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """``||Phi^T Phi||_2`` as the product of the factor Gram norms."""
    out = 1.0
    for f in D.factors:
        out *= _largest_eigenvalue(f.T @ f, tol, max_iter)
    return out
