"""Random-block hold-out validation along a lambda path.

Each repeat removes one uniformly placed axis-aligned block of grid cells
from every group, refits the path on what is left and scores each fit by the
soft maximin loss restricted to the removed block.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapabilityError, PreconditionError, ShapeError
from .loss import GroupedDataset, group_losses, lse
from .optimizer import fit_path, lambda_path


@dataclass(frozen=True)
class CvConfig:
    block_dims: tuple
    zeta: float
    repeats: int = 10
    seed: int = 0
    lambdas: Optional[tuple] = None
    lambda_count: int = 10
    lambda_ratio: float = 1e-4
    penalty: str = "l1"
    solver: str = "npg"
    solver_config: object = None
    threads: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise PreconditionError("repeats must be >= 1")
        if any(b < 1 for b in self.block_dims):
            raise PreconditionError("block extents must be positive")


@dataclass
class CvReport:
    lambdas: np.ndarray
    mean_loss: np.ndarray
    per_repeat: np.ndarray
    selected: int
    blocks: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "mean_loss": self.mean_loss.tolist(),
            "per_repeat": self.per_repeat.tolist(),
            "selected": int(self.selected),
            "blocks": [list(map(int, b)) for b in self.blocks],
        }


def holdout_loss(beta, data: GroupedDataset, mask, zeta: float) -> float:
    """Soft maximin loss using only the cells where `mask` is True."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise PreconditionError("hold-out mask is empty")
    return lse(group_losses(data.with_mask(mask), beta), zeta)


def select_index(mean_loss) -> int:
    """Index of the smallest mean loss; ties go to the lower index (larger lambda)."""
    return int(np.argmin(np.asarray(mean_loss)))


def block_mask(grid, start, block_dims) -> np.ndarray:
    mask = np.zeros(grid, dtype=bool)
    mask[tuple(slice(s, s + b) for s, b in zip(start, block_dims))] = True
    return mask


def _one_repeat(data, cfg, lambdas, seed_seq):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    grid = data.design.row_dims
    start = tuple(int(rng.integers(0, n - b + 1)) for n, b in zip(grid, cfg.block_dims))
    held = block_mask(grid, start, cfg.block_dims)
    train = data.with_mask(~held)
    if train.mask is not None and np.any(train.mask & held):
        raise AssertionError("training cells overlap the hold-out block")
    fit = fit_path(
        train, cfg.zeta, lambdas, penalty=cfg.penalty, solver=cfg.solver, config=cfg.solver_config
    )
    test = data.with_mask(held)
    losses = [lse(group_losses(test, fit.coef(k)), cfg.zeta) for k in range(len(lambdas))]
    return start, np.array(losses)


def block_cv(data: GroupedDataset, config: CvConfig) -> CvReport:
    if not data.shared_design:
        raise CapabilityError("block validation needs grid data with a shared design")
    grid = data.design.row_dims
    if len(config.block_dims) != len(grid):
        raise ShapeError(f"block dims {config.block_dims} do not match grid {grid}")
    if any(b > n for b, n in zip(config.block_dims, grid)):
        raise PreconditionError(f"block {config.block_dims} exceeds grid {grid}")
    if tuple(config.block_dims) == tuple(grid):
        raise PreconditionError("the block covers the whole grid; nothing left to fit")

    if config.lambdas is not None:
        lambdas = np.asarray(config.lambdas, dtype=float)
    elif config.penalty == "l1":
        lambdas = lambda_path(data, config.zeta, config.lambda_count, config.lambda_ratio)
    else:
        lambdas = np.zeros(1)

    seeds = np.random.SeedSequence(config.seed).spawn(config.repeats)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda s: _one_repeat(data, config, lambdas, s), seeds))
    else:
        results = [_one_repeat(data, config, lambdas, s) for s in seeds]

    per_repeat = np.stack([r[1] for r in results])
    mean_loss = per_repeat.mean(axis=0)
    return CvReport(lambdas, mean_loss, per_repeat, select_index(mean_loss), [r[0] for r in results])
