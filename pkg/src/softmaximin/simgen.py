"""Simulated heterogeneous signals with a known common component.

Every group draws from its own Philox stream, obtained by spawning
``SeedSequence(seed)`` once per group, in the order: nuisance index set,
phase, noise. Groups are therefore reproducible independently of each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BSplineSpec, FourierSpec, bspline_design, fourier_design
from .loss import GroupedDataset
from .tensor import TensorDesign, design_matvec

N_GROUPS = 50
NUISANCE_TERMS = 7
NUISANCE_SYSTEM = 101  # nuisance indices are drawn from 1..101
NOISE_VAR = 10.0

N_1D = 2001
AMP_1D = 50.0
AMP_3D = 5.0
GRID_3D = (25, 25, 101)


@dataclass
class SimTruth:
    signal: np.ndarray
    seed: int
    grid: list
    index_sets: list
    phases: np.ndarray


def _group_streams(seed: int, G: int):
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(G)]


def _draw_nuisance(rng):
    J = np.sort(rng.choice(NUISANCE_SYSTEM, NUISANCE_TERMS, replace=False)) + 1
    p = rng.uniform(-np.pi, np.pi)
    return J, p


def signal_1d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.cos(10 * 2 * np.pi * x) + 1.5 * np.sin(5 * 2 * np.pi * x)


def grid_1d() -> np.ndarray:
    # grid index i = 0..2000 mapped onto [0, 1]
    return np.arange(N_1D) / (N_1D - 1.0)


def design_1d(num_basis: int = 101) -> TensorDesign:
    return TensorDesign([fourier_design(FourierSpec(num_basis, 1.0), grid_1d())])


def gen_1d(seed: int, *, noise: bool = True, nuisance: bool = True, G: int = N_GROUPS, design=None):
    """G noisy copies of a common 1D signal plus group-specific periodic terms.

    ``Y_gi = f(x_i) + 50 sum_{j in J_g} phi_j(x_i + p_g) + eps_gi`` on 2001
    points in [0, 1], with ``phi_j`` the period-one Fourier system,
    ``|J_g| = 7`` drawn without replacement from 1..101,
    ``p_g ~ U(-pi, pi)`` and ``eps ~ N(0, 10)`` (variance 10).
    """
    x = grid_1d()
    f = signal_1d(x)
    system = FourierSpec(NUISANCE_SYSTEM, 1.0)
    Y = np.empty((x.size, G))
    sets, phases = [], []
    for g, rng in enumerate(_group_streams(seed, G)):
        J, p = _draw_nuisance(rng)
        y = f.copy()
        if nuisance:
            y += AMP_1D * fourier_design(system, x + p)[:, J - 1].sum(axis=1)
        if noise:
            y += rng.normal(0.0, np.sqrt(NOISE_VAR), x.size)
        Y[:, g] = y
        sets.append(J)
        phases.append(p)
    D = design if design is not None else design_1d()
    return GroupedDataset(D, Y), SimTruth(f, seed, [x], sets, np.array(phases))


def normal_density(x, mean: float, var: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)


def grid_3d():
    return [np.arange(1, n + 1, dtype=float) for n in GRID_3D]


def signal_3d(x, y, t) -> np.ndarray:
    return np.einsum(
        "i,j,k->ijk",
        normal_density(x, 12.5, 4.0),
        normal_density(y, 12.5, 4.0),
        normal_density(t, 50.0, 25.0),
    )


def design_3d(num_basis=(10, 10, 20), degree: int = 3) -> TensorDesign:
    factors = []
    for pts, nb in zip(grid_3d(), num_basis):
        factors.append(bspline_design(BSplineSpec(nb, (pts[0], pts[-1]), degree), pts))
    return TensorDesign(factors)


def gen_3d(seed: int, *, noise: bool = True, nuisance: bool = True, G: int = N_GROUPS, design=None):
    """3D analogue of :func:`gen_1d` on the grid 1..25 x 1..25 x 1..101.

    The common signal is a product of normal densities (means 12.5, 12.5, 50;
    variances 4, 4, 25). Nuisance terms are
    ``5 phi_j(x + p) phi_j(y + p) phi_j(t + p)`` where each marginal ``phi_j``
    is the Fourier system whose period is that axis' extent.
    """
    x, y, t = grid_3d()
    f = signal_3d(x, y, t)
    systems = [FourierSpec(NUISANCE_SYSTEM, float(n)) for n in GRID_3D]
    Y = np.empty(GRID_3D + (G,))
    sets, phases = [], []
    for g, rng in enumerate(_group_streams(seed, G)):
        J, p = _draw_nuisance(rng)
        cube = f.copy()
        if nuisance:
            ax, ay, at = (fourier_design(s, c + p)[:, J - 1] for s, c in zip(systems, (x, y, t)))
            cube += AMP_3D * np.einsum("im,jm,km->ijk", ax, ay, at)
        if noise:
            cube += rng.normal(0.0, np.sqrt(NOISE_VAR), GRID_3D)
        Y[..., g] = cube
        sets.append(J)
        phases.append(p)
    D = design if design is not None else design_3d()
    return GroupedDataset(D, Y), SimTruth(f, seed, [x, y, t], sets, np.array(phases))


def mse_vs_truth(beta, design: TensorDesign, truth: SimTruth) -> float:
    """Mean squared difference between the fitted signal and the true common signal."""
    fitted = design_matvec(design, beta)
    return float(np.mean((fitted - truth.signal) ** 2))
