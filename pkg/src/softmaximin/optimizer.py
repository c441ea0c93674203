"""Proximal gradient solvers for the penalized soft maximin problem.

Two solvers share one stopping rule: a fit stops once the relative change of
the coefficients drops below ``tol`` *and* the unit-step KKT residual

    ||beta - prox_lam(beta - grad s(beta))||_inf

is below ``kkt_tol * (1 + lam)``. Hitting ``max_iter`` first returns the
current iterate flagged ``converged=False`` with a warning.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericalError, PreconditionError, StepFailureError
from .loss import GroupedDataset, SoftMaximinProblem, evaluate, evaluate_terms, lipschitz_bound


class ConvergenceWarning(UserWarning):
    pass


def prox_l1(v, t: float) -> np.ndarray:
    """Soft thresholding, the proximal map of ``t * ||.||_1``."""
    if not t > 0:
        raise PreconditionError(f"threshold must be positive, got {t}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _prox(v, t):
    # t == 0 is the unpenalized case
    return v if t == 0 else prox_l1(v, t)


def kkt_residual(problem: SoftMaximinProblem, beta, grad=None) -> float:
    """``||beta - prox_{lam J}(beta - grad)||_inf``; zero exactly at a minimiser."""
    beta = np.asarray(beta, dtype=float)
    if grad is None:
        grad = evaluate(problem.data, problem.zeta, beta).grad
    return float(np.max(np.abs(beta - _prox(beta - grad, problem.penalty_weight))))


L_RULES = ("bb", "bb1", "constant")


@dataclass(frozen=True)
class NpgConfig:
    """Settings for :func:`npg_solve`.

    ``L_init_rule`` picks the trial inverse step at each iteration:

    * ``"bb"``: adaptive Barzilai-Borwein. With ``L1 = s'y/s's`` and
      ``L2 = y'y/s'y`` from the last two iterates, use the largest ``L2`` of
      the last ``bb_memory`` iterations when ``L1/L2 < bb_switch``, else ``L1``.
    * ``"bb1"``: always ``L1``.
    * ``"constant"``: always ``L_init``.

    The trial value is clamped to ``[L_min, L_max]`` before backtracking.
    """

    L_min: float = 1e-12
    L_max: float = 1e12
    tau: float = 2.0
    c: float = 1e-4
    M: int = 4
    max_iter: int = 20_000
    tol: float = 1e-8
    L_init_rule: str = "bb"
    L_init: float = 1.0
    bb_memory: int = 9
    bb_switch: float = 0.8
    kkt_tol: float = 1e-6
    record_trace: bool = False

    def __post_init__(self):
        if not 0 < self.L_min <= self.L_max:
            raise PreconditionError("need 0 < L_min <= L_max")
        if not self.tau > 1:
            raise PreconditionError("tau must exceed 1")
        if not self.c > 0:
            raise PreconditionError("c must be positive")
        if self.M < 0 or int(self.M) != self.M:
            raise PreconditionError("M must be a non-negative integer")
        if self.max_iter < 1 or not self.tol > 0:
            raise PreconditionError("max_iter must be >= 1 and tol positive")
        if self.L_init_rule not in L_RULES:
            raise PreconditionError(f"L_init_rule must be one of {L_RULES}")
        if self.bb_memory < 1 or not 0 < self.bb_switch <= 1:
            raise PreconditionError("need bb_memory >= 1 and 0 < bb_switch <= 1")


@dataclass(frozen=True)
class FistaConfig:
    """`pair_scale` < 1 shrinks the response-spread part of the Lipschitz
    bound; steps are then checked and the constant doubled (up to the proven
    bound) whenever the quadratic upper model fails."""

    max_iter: int = 20_000
    tol: float = 1e-8
    pair_scale: float = 1.0
    kkt_tol: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.pair_scale <= 1:
            raise PreconditionError("pair_scale must lie in [0, 1]")
        if self.max_iter < 1 or not self.tol > 0:
            raise PreconditionError("max_iter must be >= 1 and tol positive")


class NpgStep(NamedTuple):
    """One accepted NPG iteration.

    The acceptance test is ``delta_new <= delta_ref - decrease`` where
    ``delta_new = F(beta_new) - F(beta_k)``, ``delta_ref = max_window F - F(beta_k)``
    and ``decrease = c/2 ||beta_new - beta_k||^2``.
    """

    k: int
    L: float
    objective: float
    delta_new: float
    delta_ref: float
    decrease: float


@dataclass
class Solution:
    beta: np.ndarray
    objective: float
    iterations: int
    backtracks: int
    kkt: float
    converged: bool
    lam: float
    trace: list = field(default_factory=list)


class _Point:
    """Smooth-part quantities at one coefficient array."""

    __slots__ = ("beta", "gb", "h", "value", "w", "logw", "grad", "l1")

    def __init__(self, data: GroupedDataset, zeta: float, beta: np.ndarray):
        self.beta = beta
        terms = data.quadratic_terms(beta)
        self.gb = terms[2]
        ev = evaluate_terms(data, zeta, *terms)
        self.h, self.value, self.w, self.grad = ev.h, ev.value, ev.weights, ev.grad
        # weights underflow to 0 at large zeta; their logs stay exact
        self.logw = zeta * (ev.h - ev.value)
        self.l1 = float(np.abs(beta).sum())


def _smooth_increment(data: GroupedDataset, zeta: float, at: _Point, cand: np.ndarray) -> float:
    """``s(cand) - s(at.beta)`` without subtracting two large numbers."""
    d = cand - at.beta
    lin_d, quad_d, _ = data.quadratic_terms(d)
    if data.shared_design:
        cross = 2.0 * float(np.vdot(d, at.gb))
    else:
        cross = 2.0 * (d @ at.gb)
    dh = (cross + quad_d - 2.0 * lin_d) / data.group_sizes
    z = zeta * dh
    zmax = z.max()
    if zmax <= 1.0:
        inc = float(np.dot(at.w, np.expm1(z)))
        # log1p loses nothing near 0; far below it the shifted form is safe
        if inc > -0.5:
            return float(np.log1p(inc) / zeta)
    t = at.logw + z
    top = t.max()
    return float((top + np.log(np.exp(t - top).sum())) / zeta)


def _penalty_increment(problem, old, new) -> float:
    lam = problem.penalty_weight
    if lam == 0:
        return 0.0
    return lam * float(np.sum(np.abs(new) - np.abs(old)))


def _rel_change(new, old) -> float:
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(new), np.finfo(float).tiny))


def _finish(problem, beta, iterations, backtracks, converged_iter, trace, kkt_tol, name):
    ev = evaluate(problem.data, problem.zeta, beta)
    obj = ev.value + problem.penalty_value(beta)
    if not np.isfinite(obj):
        raise NumericalError(f"{name}: non-finite objective at the final iterate")
    kkt = kkt_residual(problem, beta, ev.grad)
    converged = converged_iter and kkt <= kkt_tol * (1.0 + problem.lam)
    if not converged:
        warnings.warn(
            f"{name} stopped after {iterations} iterations with KKT residual {kkt:.3e} "
            f"(lambda={problem.lam:.4g})",
            ConvergenceWarning,
            stacklevel=3,
        )
    return Solution(beta, obj, iterations, backtracks, kkt, converged, problem.lam, trace)


def _start(problem, beta0):
    if beta0 is None:
        return np.zeros(problem.data.coef_shape)
    return problem.data.check_beta(beta0).copy()


def npg_solve(problem: SoftMaximinProblem, config: Optional[NpgConfig] = None, beta0=None) -> Solution:
    """Non-monotone proximal gradient with backtracking.

    Each iteration picks an inverse step ``L_k`` in ``[L_min, L_max]``
    (spectral estimate from the last two iterates, see :class:`NpgConfig`), takes the
    proximal step and accepts it when the objective sits below the maximum of
    the last ``M + 1`` objective values minus ``c/2 ||step||^2``; otherwise
    ``L_k`` is multiplied by ``tau`` and the step retried.

    Raises
    ------
    StepFailureError
        If backtracking pushes ``L_k`` past ``L_max``.
    """
    cfg = config or NpgConfig()
    data, zeta, lam = problem.data, problem.zeta, problem.penalty_weight
    target = cfg.kkt_tol * (1.0 + problem.lam)

    pt = _Point(data, zeta, _start(problem, beta0))
    if not np.isfinite(pt.value):
        raise NumericalError("npg: non-finite objective at the starting point")
    F = pt.value + lam * pt.l1
    offsets = [0.0]  # F(beta_i) - F(beta_k) over the non-monotone window
    prev = None
    recent = deque(maxlen=cfg.bb_memory)
    L = min(max(cfg.L_init, cfg.L_min), cfg.L_max)
    trace = []
    backtracks = 0
    rel = np.inf
    k = 0
    done = False
    while k < cfg.max_iter:
        kkt = float(np.max(np.abs(pt.beta - _prox(pt.beta - pt.grad, lam))))
        if kkt == 0.0 or (kkt <= target and rel < cfg.tol):
            done = True
            break
        if cfg.L_init_rule != "constant" and prev is not None:
            s = pt.beta - prev.beta
            y = pt.grad - prev.grad
            ss = float(np.vdot(s, s))
            sy = float(np.vdot(s, y))
            if ss > 0 and sy > 0 and np.isfinite(sy):
                L = sy / ss
                if cfg.L_init_rule == "bb":
                    L2 = float(np.vdot(y, y)) / sy
                    recent.append(L2)
                    if L / L2 < cfg.bb_switch:
                        L = max(recent)
        elif cfg.L_init_rule == "constant":
            L = cfg.L_init
        L = min(max(L, cfg.L_min), cfg.L_max)
        delta_ref = max(offsets)

        while True:
            cand = _prox(pt.beta - pt.grad / L, lam / L)
            d2 = float(np.vdot(cand - pt.beta, cand - pt.beta))
            decrease = 0.5 * cfg.c * d2
            try:
                delta = _smooth_increment(data, zeta, pt, cand) + _penalty_increment(problem, pt.beta, cand)
            except (FloatingPointError, NumericalError):
                delta = np.inf
            if np.isfinite(delta) and delta <= delta_ref - decrease:
                break
            L *= cfg.tau
            backtracks += 1
            if L > cfg.L_max:
                raise StepFailureError(
                    f"npg: L exceeded L_max={cfg.L_max:g} at iteration {k} "
                    f"(objective {F!r}, last increment {delta!r})"
                )

        new = _Point(data, zeta, cand)
        F_new = new.value + lam * new.l1
        if not np.isfinite(F_new):
            raise NumericalError(f"npg: non-finite objective at iteration {k}")
        if cfg.record_trace:
            trace.append(NpgStep(k, L, F_new, delta, delta_ref, decrease))
        rel = _rel_change(cand, pt.beta)
        offsets = [o - delta for o in offsets] + [0.0]
        offsets = offsets[-(cfg.M + 1):]
        prev, pt, F = pt, new, F_new
        k += 1

    return _finish(problem, pt.beta, k, backtracks, done, trace, cfg.kkt_tol, "npg")


def fista_solve(problem: SoftMaximinProblem, config: Optional[FistaConfig] = None, beta0=None) -> Solution:
    """Accelerated proximal gradient with step ``1 / L`` from :func:`lipschitz_bound`.

    Needs a design shared by all groups, since only then is the gradient
    globally Lipschitz.
    """
    cfg = config or FistaConfig()
    data, zeta, lam = problem.data, problem.zeta, problem.penalty_weight
    target = cfg.kkt_tol * (1.0 + problem.lam)
    L_full = lipschitz_bound(data, zeta)
    L = L_full if cfg.pair_scale == 1 else lipschitz_bound(data, zeta, cfg.pair_scale)

    x = _start(problem, beta0)
    y = x
    t = 1.0
    history = []
    backtracks = 0
    done = False
    k = 0
    at = _Point(data, zeta, y)
    while k < cfg.max_iter:
        if not np.isfinite(at.value):
            raise NumericalError(f"fista: non-finite objective at iteration {k}; recent {history[-5:]}")
        cand = _prox(y - at.grad / L, lam / L)
        if L < L_full:
            d = cand - y
            model = float(np.vdot(at.grad, d)) + 0.5 * L * float(np.vdot(d, d))
            if _smooth_increment(data, zeta, at, cand) > model:
                L = min(2.0 * L, L_full)
                backtracks += 1
                continue
        k += 1
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = cand + ((t - 1.0) / t_new) * (cand - x)
        rel = _rel_change(cand, x)
        x, t = cand, t_new
        history.append(at.value)
        if rel < cfg.tol and kkt_residual(problem, x) <= target:
            done = True
            break
        at = _Point(data, zeta, y)
    return _finish(problem, x, k, backtracks, done, [], cfg.kkt_tol, "fista")


def lambda_max(data: GroupedDataset, zeta: float) -> float:
    """Smallest l1 weight with an all-zero solution, ``||grad s(0)||_inf``."""
    return float(np.max(np.abs(evaluate(data, zeta, np.zeros(data.coef_shape)).grad)))


def lambda_path(data: GroupedDataset, zeta: float, K: int = 10, ratio: float = 1e-4) -> np.ndarray:
    """`K` log-spaced weights from ``lambda_max`` down to ``ratio * lambda_max``."""
    if K < 1:
        raise PreconditionError(f"need at least one lambda, got K={K}")
    if not 0 < ratio < 1:
        raise PreconditionError(f"ratio must lie in (0, 1), got {ratio}")
    lmax = lambda_max(data, zeta)
    if not lmax > 0:
        raise PreconditionError("gradient at zero vanishes; every lambda gives the zero fit")
    if K == 1:
        return np.array([lmax])
    return lmax * ratio ** (np.arange(K) / (K - 1))


@dataclass
class FitResult:
    """Coefficients along a lambda path; ``coefs[..., k]`` belongs to ``lambdas[k]``."""

    coefs: np.ndarray
    lambdas: np.ndarray
    zeta: float
    objectives: np.ndarray
    iterations: np.ndarray
    backtracks: np.ndarray
    kkt: np.ndarray
    converged: np.ndarray
    solver: str = "npg"
    penalty: str = "l1"

    def coef(self, k: int) -> np.ndarray:
        return self.coefs[..., k]

    def __len__(self):
        return len(self.lambdas)


SOLVERS = {"npg": npg_solve, "fista": fista_solve}


def solve(problem: SoftMaximinProblem, solver: str = "npg", config=None, beta0=None) -> Solution:
    if solver not in SOLVERS:
        raise PreconditionError(f"unknown solver {solver!r}")
    return SOLVERS[solver](problem, config, beta0)


def fit_path(
    data: GroupedDataset,
    zeta: float,
    lambdas=None,
    *,
    lambda_count: int = 10,
    lambda_ratio: float = 1e-4,
    penalty: str = "l1",
    solver: str = "npg",
    config=None,
) -> FitResult:
    """Solve along a decreasing lambda path, warm-starting each fit from the previous one."""
    if lambdas is None:
        lambdas = lambda_path(data, zeta, lambda_count, lambda_ratio) if penalty == "l1" else np.zeros(1)
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    beta = None
    sols = []
    for lam in lambdas:
        sol = solve(SoftMaximinProblem(data, zeta, float(lam), penalty), solver, config, beta)
        sols.append(sol)
        beta = sol.beta
    return FitResult(
        coefs=np.stack([s.beta for s in sols], axis=-1),
        lambdas=lambdas,
        zeta=float(zeta),
        objectives=np.array([s.objective for s in sols]),
        iterations=np.array([s.iterations for s in sols]),
        backtracks=np.array([s.backtracks for s in sols]),
        kkt=np.array([s.kkt for s in sols]),
        converged=np.array([s.converged for s in sols]),
        solver=solver,
        penalty=penalty,
    )
