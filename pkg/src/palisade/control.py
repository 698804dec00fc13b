"""Pattern-neutralizing controls and parameter-combination pattern synthesis.

A disturbance pair (xi1, xi2) enters the state system as an extra removal
term ``-xi1 u1`` on the tumor equation and a source ``+xi2 u2`` on the acid
equation.  With the model parameters frozen at an estimate, the neutralizing
control is the xi minimizing the terminal distance to a neutral tissue
density (plus a Tikhonov term in xi alone), found by the same projected
gradient descent with backtracking used for parameter estimation.  In
pH-only mode xi1 is frozen at zero and only the acid channel is actuated.

New patterns are synthesized by convex combination of parameter sets
estimated for different targets, and combined controls are the matching
convex combination of their neutralizing functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .adjoint import solve_adjoint
from .config import PARAM_NAMES, RunConfig
from .forward import ParamSet, StateTrajectory, solve_forward
from .grid import Grid2D, norm_l2
from .optimizer import GAMMA_MIN, eval_metrics

__all__ = [
    "ControlSet",
    "NeutralizeResult",
    "solve_forward_controlled",
    "neutralize",
    "combine_params",
    "combine_controls",
]

DEFAULT_XI_BOUNDS = {"xi1": (0.0, 10.0), "xi2": (-10.0, 10.0)}

MODE_FULL = "full"
MODE_PH_ONLY = "ph-only"


@dataclass
class ControlSet:
    """Disturbance fields xi1 (tumor removal, >= 0) and xi2 (acid forcing)."""

    xi1: np.ndarray
    xi2: np.ndarray
    mode: str = MODE_FULL
    lam: float = 1e-4
    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_XI_BOUNDS))

    def __post_init__(self):
        if self.mode not in (MODE_FULL, MODE_PH_ONLY):
            raise ValueError(f"unknown control mode {self.mode!r}")
        if self.xi1.shape != self.xi2.shape:
            raise ValueError("xi1 and xi2 must share a shape")
        if self.bounds["xi1"][0] < 0:
            raise ValueError("xi1 lower bound must be nonnegative")

    @classmethod
    def zeros(cls, grid: Grid2D, nt: int, mode: str = MODE_FULL, lam: float = 1e-4,
              bounds: Mapping[str, tuple[float, float]] | None = None) -> "ControlSet":
        shape = (nt + 1, *grid.shape)
        return cls(xi1=np.zeros(shape), xi2=np.zeros(shape), mode=mode, lam=lam,
                   bounds=dict(bounds or DEFAULT_XI_BOUNDS))

    def copy(self) -> "ControlSet":
        return ControlSet(xi1=self.xi1.copy(), xi2=self.xi2.copy(), mode=self.mode,
                          lam=self.lam, bounds=dict(self.bounds))

    def project(self) -> "ControlSet":
        """Clamp onto the admissible box; pH-only mode forces xi1 to zero."""
        xi1 = np.clip(self.xi1, *self.bounds["xi1"])
        if self.mode == MODE_PH_ONLY:
            xi1 = np.zeros_like(self.xi1)
        xi2 = np.clip(self.xi2, *self.bounds["xi2"])
        return ControlSet(xi1=xi1, xi2=xi2, mode=self.mode, lam=self.lam, bounds=dict(self.bounds))


def solve_forward_controlled(theta: ParamSet, xi: ControlSet, cfg: RunConfig,
                             scheme: str = "explicit") -> StateTrajectory:
    """State solve with the disturbance terms active."""
    return solve_forward(theta, cfg, xi=xi, scheme=scheme)


def _control_cost(traj: StateTrajectory, xi: ControlSet, target: np.ndarray,
                  grid: Grid2D) -> tuple[float, float]:
    misfit = 0.5 * norm_l2(traj.u1[-1] - target, grid) ** 2
    nt = traj.time.nt
    reg = 0.0
    if xi.lam > 0:
        sq = np.sum(xi.xi1[:nt] ** 2) + np.sum(xi.xi2[:nt] ** 2)
        reg = 0.5 * xi.lam * traj.time.tau * float(sq) * grid.cell_area
    return misfit, reg


def _control_gradient(traj: StateTrajectory, adj, xi: ControlSet, cfg: RunConfig):
    """Cost gradient with respect to (xi1, xi2); same slice pairing as optimizer."""
    nt = traj.time.nt
    g1 = np.zeros_like(xi.xi1)
    g2 = np.zeros_like(xi.xi2)
    g1[:nt] = xi.lam * xi.xi1[:nt] - traj.u1[:nt] * adj.p1[:nt]
    g2[:nt] = xi.lam * xi.xi2[:nt] + traj.u2[:nt] * adj.p2[1:]
    if xi.mode == MODE_PH_ONLY:
        g1[:] = 0.0
    return g1, g2


@dataclass
class NeutralizeResult:
    xi: ControlSet
    traj: StateTrajectory
    history: list[dict] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    epsilon: float = 0.0

    @property
    def costs(self) -> list[float]:
        return [row["cost"] for row in self.history]


def neutralize(theta_hat: ParamSet, neutral_target: np.ndarray, cfg: RunConfig,
               mode: str = MODE_FULL, xi0: ControlSet | None = None,
               lam_xi: float = 1e-4, metrics_eps: float = 0.05,
               on_iterate=None) -> NeutralizeResult:
    """Find the disturbance that steers the frozen model toward a neutral density.

    Projected gradient descent over xi only: trial steps project
    ``xi - gamma g`` with gamma halved from 1 until the cost strictly
    decreases; stops on cost < epsilon, the iteration cap, or a stall.
    """
    grid, time = cfg.grid, cfg.time
    if neutral_target.shape != grid.shape:
        raise ValueError("neutral target does not match the grid")
    if xi0 is None:
        xi0 = ControlSet.zeros(grid, time.nt, mode=mode, lam=lam_xi)
    xi = xi0.project()

    eps = cfg.epsilon if cfg.epsilon is not None else 1e-4 * max(norm_l2(neutral_target, grid) ** 2, 1e-8)
    traj = solve_forward(theta_hat, cfg, xi=xi)
    misfit, reg = _control_cost(traj, xi, neutral_target, grid)
    cost = misfit + reg

    result = NeutralizeResult(xi=xi, traj=traj, epsilon=eps)

    def record(k, gamma, misfit, reg):
        m = eval_metrics(traj.u1[-1], neutral_target, metrics_eps, grid)
        row = {
            "iteration": k, "cost": misfit + reg, "misfit": misfit,
            "regularization": reg, "gamma": gamma,
            "e2": m.e2, "e_inf": m.e_inf, "e_rel": m.e_rel, "e_d": m.e_d,
        }
        result.history.append(row)
        if on_iterate is not None:
            on_iterate(row)

    record(0, None, misfit, reg)
    if cost < eps:
        result.converged = True
        return result

    for k in range(1, cfg.max_iters + 1):
        adj = solve_adjoint(traj, theta_hat, neutral_target, cfg, xi=xi)
        g1, g2 = _control_gradient(traj, adj, xi, cfg)

        gamma = 1.0
        accepted = False
        while gamma >= GAMMA_MIN:
            trial = ControlSet(xi1=xi.xi1 - gamma * g1, xi2=xi.xi2 - gamma * g2,
                               mode=xi.mode, lam=xi.lam, bounds=dict(xi.bounds)).project()
            trial_traj = solve_forward(theta_hat, cfg, xi=trial)
            t_misfit, t_reg = _control_cost(trial_traj, trial, neutral_target, grid)
            if t_misfit + t_reg < cost:
                xi, traj = trial, trial_traj
                misfit, reg, cost = t_misfit, t_reg, t_misfit + t_reg
                accepted = True
                break
            gamma *= 0.5

        if not accepted:
            result.stalled = True
            break
        record(k, gamma, misfit, reg)
        if cost < eps:
            result.converged = True
            break

    result.xi, result.traj = xi, traj
    return result


def _combine(arrays: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    out = weights[0] * arrays[0]
    for w, a in zip(weights[1:], arrays[1:]):
        if a.shape != arrays[0].shape:
            raise ValueError("cannot combine fields of different shapes")
        out = out + w * a
    return out


def combine_params(theta_k: ParamSet, theta_l: ParamSet,
                   weights: Sequence[float] = (0.5, 0.5)) -> ParamSet:
    """Pointwise convex combination of two parameter sets, then box projection."""
    combined = {
        name: _combine([theta_k.component(name), theta_l.component(name)], weights)
        for name in PARAM_NAMES
    }
    return ParamSet(**combined, bounds=dict(theta_k.bounds)).project()


def combine_controls(xi_k: ControlSet, xi_l: ControlSet,
                     weights: Sequence[float] = (0.5, 0.5)) -> ControlSet:
    """Convex combination of two controls; the mean of admissible xi1 stays >= 0."""
    mode = xi_k.mode if xi_k.mode == xi_l.mode else MODE_FULL
    return ControlSet(
        xi1=_combine([xi_k.xi1, xi_l.xi1], weights),
        xi2=_combine([xi_k.xi2, xi_l.xi2], weights),
        mode=mode, lam=xi_k.lam, bounds=dict(xi_k.bounds),
    ).project()
