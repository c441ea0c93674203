"""Univariate bases evaluated on a grid, giving the marginal design matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError


@dataclass(frozen=True)
class BSplineSpec:
    """Clamped B-splines on uniform knots over ``domain``."""

    num_basis: int
    domain: tuple = (0.0, 1.0)
    degree: int = 3

    def __post_init__(self):
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))
        if self.degree < 0:
            raise PreconditionError(f"degree must be non-negative, got {self.degree}")
        if self.num_basis <= self.degree:
            raise PreconditionError(
                f"num_basis ({self.num_basis}) must exceed degree ({self.degree})"
            )
        if not a < b:
            raise PreconditionError(f"empty domain [{a}, {b}]")

    def knots(self) -> np.ndarray:
        a, b = self.domain
        k = self.degree
        inner = np.linspace(a, b, self.num_basis - k + 1)[1:-1]
        return np.concatenate([np.full(k + 1, a), inner, np.full(k + 1, b)])


@dataclass(frozen=True)
class FourierSpec:
    """Real Fourier system ordered (constant, sin 1, cos 1, sin 2, cos 2, ...)."""

    num_basis: int
    period: float = 1.0

    def __post_init__(self):
        if self.num_basis < 1:
            raise PreconditionError(f"num_basis must be >= 1, got {self.num_basis}")
        if not self.period > 0:
            raise PreconditionError(f"period must be positive, got {self.period}")


def bspline_design(spec: BSplineSpec, points) -> np.ndarray:
    """Evaluate every B-spline of `spec` at `points`.

    Parameters
    ----------
    spec : BSplineSpec
    points : array_like
        Strictly increasing evaluation points inside ``spec.domain``.

    Returns
    -------
    ndarray, shape (len(points), spec.num_basis)
        Row ``i`` holds the basis values at ``points[i]``. At most
        ``degree + 1`` entries per row are nonzero and each row sums to one.
    """
    x = np.asarray(points, dtype=float).ravel()
    a, b = spec.domain
    if x.size and (x.min() < a or x.max() > b):
        raise DomainError(f"points must lie in [{a}, {b}], got range [{x.min()}, {x.max()}]")
    if np.any(np.diff(x) <= 0):
        raise PreconditionError("points must be strictly increasing")

    k = spec.degree
    t = spec.knots()
    nb = spec.num_basis
    # knot span index: t[span] <= x < t[span + 1], right end folded into the last span
    span = np.clip(np.searchsorted(t, x, side="right") - 1, k, nb - 1)

    m = x.size
    N = np.zeros((m, k + 1))
    N[:, 0] = 1.0
    left = np.zeros((m, k + 1))
    right = np.zeros((m, k + 1))
    for j in range(1, k + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(m)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved

    out = np.zeros((m, nb))
    rows = np.arange(m)
    for r in range(k + 1):
        out[rows, span - k + r] = N[:, r]
    return out


def fourier_design(spec: FourierSpec, points) -> np.ndarray:
    """Fourier basis matrix, columns normalised to unit L2 norm over one period."""
    x = np.asarray(points, dtype=float).ravel()
    P = spec.period
    out = np.empty((x.size, spec.num_basis))
    out[:, 0] = 1.0 / np.sqrt(P)
    amp = np.sqrt(2.0 / P)
    for col in range(1, spec.num_basis):
        k = (col + 1) // 2
        arg = 2.0 * np.pi * k * x / P
        out[:, col] = amp * (np.sin(arg) if col % 2 == 1 else np.cos(arg))
    return out
