"""Cost functional, adjoint gradient, box projection, and the descent loop.

The reduced cost of a parameter set is

    J(theta) = 1/2 ||u1(T) - target||_L2^2
               + sum_i lam_i/2 * sum_{n<nt} tau ||theta_i(t_n)||_L2^2,

the time quadrature matching the explicit state scheme (left endpoint, so a
constant-in-time component integrates to exactly t_final times its spatial
norm squared).  The gradient is assembled per time slice from the state and
adjoint trajectories:

    sigma:  lam s - grad u1 . grad p1
    kappa:  lam k + g_k div(u1 grad p1)
    delta:  lam d - g_d u1 grad u2 . grad p1
    alpha:  lam a - u2 p2
    beta:   lam b + f2(u) p2
    mu:     lam m + f1(u) p1

Signs are the ones that pass the central finite-difference oracle on the
discrete cost.  Time pairing: slice-n state factors multiply p1 at slice n
(left-endpoint quadrature of the continuous formulas) but p2 at slice n+1
(the transpose-exact slice).  The p2 channels must keep the post-step slice
because p2 is pinned to zero at the final time and a same-slice sample would
misweight that terminal layer by O(1/nt); the p1 channels tolerate the
natural quadrature, leaving a small O(tau) mismatch against the
finite-difference oracle that halves under time refinement.

The descent loop is projected gradient with backtracking: trial steps
project(theta - gamma g) with gamma halved from 1 until the cost strictly
decreases, stopping on cost < epsilon, the iteration cap, or gamma underflow
(reported as a stall).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .config import PARAM_NAMES, RunConfig
from .forward import ParamSet, StateTrajectory, solve_forward
from .grid import Grid2D, div, grad, norm_l2, norm_linf
from .kinetics import eval_f1, eval_f2

__all__ = [
    "CostReport",
    "GradientSet",
    "MetricsReport",
    "PGDResult",
    "eval_cost",
    "assemble_gradient",
    "project_box",
    "pgd_run",
    "eval_metrics",
]

GAMMA_MIN = 2.0 ** -30


@dataclass(frozen=True)
class CostReport:
    terminal_misfit: float
    regularization: float

    @property
    def total(self) -> float:
        return self.terminal_misfit + self.regularization


@dataclass
class GradientSet:
    """Per-component cost gradients, shaped like the parameter set."""

    sigma: np.ndarray
    kappa: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray

    def component(self, name: str) -> np.ndarray:
        if name not in PARAM_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def items(self):
        return ((name, getattr(self, name)) for name in PARAM_NAMES)


@dataclass(frozen=True)
class MetricsReport:
    """Error metrics between a final state and its target.

    ``e_rel`` is NaN (flagged sentinel) when the target norm vanishes;
    ``e_d`` is the fraction of the cell measure where the pointwise error
    exceeds the threshold the report was built with.
    """

    e2: float
    e_inf: float
    e_rel: float
    e_d: float
    threshold: float


def _lambdas(lam: Union[float, Mapping[str, float]]) -> dict[str, float]:
    if isinstance(lam, Mapping):
        return {k: float(lam[k]) for k in PARAM_NAMES}
    return {k: float(lam) for k in PARAM_NAMES}


def eval_cost(traj: StateTrajectory, theta: ParamSet, target: np.ndarray,
              lam: Union[float, Mapping[str, float]], grid: Grid2D) -> CostReport:
    """Terminal misfit plus Tikhonov regularization of the parameter fields."""
    if target.shape != grid.shape:
        raise ValueError(f"target shape {target.shape} does not match grid {grid.shape}")
    misfit = 0.5 * norm_l2(traj.u1[-1] - target, grid) ** 2
    lams = _lambdas(lam)
    tau = traj.time.tau
    nt = traj.time.nt
    reg = 0.0
    for name, arr in theta.items():
        w = lams[name]
        if w > 0.0:
            reg += 0.5 * w * tau * float(np.sum(arr[:nt] ** 2)) * grid.cell_area
    return CostReport(terminal_misfit=misfit, regularization=reg)


def assemble_gradient(traj: StateTrajectory, adj: AdjointTrajectory, theta: ParamSet,
                      lam: Union[float, Mapping[str, float]], cfg: RunConfig) -> GradientSet:
    """Pointwise gradient fields per time slice; the terminal slice is inert.

    Linear in the adjoint trajectory for fixed state, and reduces to
    ``lam * theta`` when the adjoint vanishes.
    """
    grid = cfg.grid
    nt = traj.time.nt
    if adj.nslices != traj.nslices:
        raise ValueError("state and adjoint trajectories are misaligned")
    lams = _lambdas(lam)

    u1, u2 = traj.u1[:nt], traj.u2[:nt]
    p1 = adj.p1[:nt]
    p2_next = adj.p2[1:]
    u1x, u1y = grad(u1, grid)
    u2x, u2y = grad(u2, grid)
    p1x, p1y = grad(p1, grid)

    g = GradientSet(**{name: np.zeros_like(theta.component(name)) for name in PARAM_NAMES})
    g.sigma[:nt] = lams["sigma"] * theta.sigma[:nt] - (u1x * p1x + u1y * p1y)
    g.kappa[:nt] = lams["kappa"] * theta.kappa[:nt] + cfg.gamma_kappa * div(u1 * p1x, u1 * p1y, grid)
    g.delta[:nt] = lams["delta"] * theta.delta[:nt] - cfg.gamma_delta * u1 * (u2x * p1x + u2y * p1y)
    g.alpha[:nt] = lams["alpha"] * theta.alpha[:nt] - u2 * p2_next
    g.beta[:nt] = lams["beta"] * theta.beta[:nt] + eval_f2(u1, u2) * p2_next
    g.mu[:nt] = lams["mu"] * theta.mu[:nt] + eval_f1(u1, u2) * p1
    return g


def project_box(theta: ParamSet) -> ParamSet:
    """Clamp every component onto its admissible box."""
    return theta.project()


def theta_inner(a, b, time, grid: Grid2D) -> float:
    """Inner product on parameter space: tau- and cell-weighted sum over components."""
    total = 0.0
    for name in PARAM_NAMES:
        total += float(np.sum(a.component(name)[: time.nt] * b.component(name)[: time.nt]))
    return total * time.tau * grid.cell_area


def eval_metrics(u1_final: np.ndarray, target: np.ndarray, eps: float,
                 grid: Grid2D) -> MetricsReport:
    """Absolute/relative L2, max, and exceedance-fraction errors."""
    if u1_final.shape != target.shape:
        raise ValueError("final state and target are on different grids")
    err = u1_final - target
    e2 = norm_l2(err, grid)
    e_inf = norm_linf(err)
    target_norm = norm_l2(target, grid)
    e_rel = e2 / target_norm if target_norm > 0 else float("nan")
    e_d = float(np.count_nonzero(np.abs(err) > eps)) / err.size
    return MetricsReport(e2=e2, e_inf=e_inf, e_rel=e_rel, e_d=e_d, threshold=eps)


@dataclass
class PGDResult:
    theta: ParamSet
    traj: StateTrajectory
    history: list[dict] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    epsilon: float = 0.0

    @property
    def costs(self) -> list[float]:
        return [row["cost"] for row in self.history]


def _default_epsilon(target: np.ndarray, grid: Grid2D) -> float:
    scale = norm_l2(target, grid) ** 2
    return 1e-4 * scale if scale > 0 else 1e-12


def pgd_run(target: np.ndarray, cfg: RunConfig, theta0: ParamSet | None = None,
            bounds: Mapping[str, tuple[float, float]] | None = None,
            metrics_eps: float = 0.05, on_iterate=None) -> PGDResult:
    """Estimate the parameter fields that steer u1(T) toward the target.

    The initial guess (componentwise constants from the config unless
    ``theta0`` is given) is projected into the box before the first solve.
    Every accepted iterate strictly decreases the cost; the run stops when
    the cost falls below epsilon, the iteration cap is reached, or no
    backtracking step decreases the cost (stall).
    """
    grid, time = cfg.grid, cfg.time
    if not np.all(np.isfinite(target)):
        raise ValueError("target contains non-finite values")
    eps = cfg.epsilon if cfg.epsilon is not None else _default_epsilon(target, grid)
    lam = cfg.lam

    if theta0 is None:
        theta0 = ParamSet.constant(grid, time.nt, cfg.theta_inits(), bounds)
    theta = project_box(theta0)
    traj = solve_forward(theta, cfg)
    cost = eval_cost(traj, theta, target, lam, grid)

    result = PGDResult(theta=theta, traj=traj, epsilon=eps)

    def record(k, gamma):
        m = eval_metrics(traj.u1[-1], target, metrics_eps, grid)
        row = {
            "iteration": k,
            "cost": cost.total,
            "misfit": cost.terminal_misfit,
            "regularization": cost.regularization,
            "gamma": gamma,
            "e2": m.e2,
            "e_inf": m.e_inf,
            "e_rel": m.e_rel,
            "e_d": m.e_d,
        }
        result.history.append(row)
        if on_iterate is not None:
            on_iterate(row)

    record(0, None)
    if cost.total < eps:
        result.converged = True
        result.theta, result.traj = theta, traj
        return result

    for k in range(1, cfg.max_iters + 1):
        adj = solve_adjoint(traj, theta, target, cfg)
        g = assemble_gradient(traj, adj, theta, lam, cfg)

        gamma = 1.0
        accepted = False
        while gamma >= GAMMA_MIN:
            trial = ParamSet(
                **{name: theta.component(name) - gamma * g.component(name) for name in PARAM_NAMES},
                bounds=dict(theta.bounds),
            ).project()
            trial_traj = solve_forward(trial, cfg)
            trial_cost = eval_cost(trial_traj, trial, target, lam, grid)
            if trial_cost.total < cost.total:
                theta, traj, cost = trial, trial_traj, trial_cost
                accepted = True
                break
            gamma *= 0.5

        if not accepted:
            result.stalled = True
            break
        record(k, gamma)
        if cost.total < eps:
            result.converged = True
            break

    result.theta, result.traj = theta, traj
    return result
