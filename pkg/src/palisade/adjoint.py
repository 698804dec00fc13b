"""Backward-in-time multiplier solve for the terminal-cost estimation problem.

The adjoint pair (p1, p2) is filled from the terminal data

    p1(T) = u1(T) - target,    p2(T) = 0

down to t = 0 by explicitly stepping the transposed linearization of the
forward scheme.  Step n consumes the stored state slice n (the same slice the
forward step n consumed), so no interpolation is needed:

    p1_n = p1_{n+1} + tau * [ div(sigma grad p1) - b . grad p1
                              + mu d1f1 p1 + beta d1f2 p2 - xi1 p1 ]
    p2_n = p2_{n+1} + tau * [ g_ph laplace p2 - alpha p2
                              + g_d div(delta u1 grad p1)
                              + mu d2f1 p1 + beta d2f2 p2 + xi2 p2 ]

with drift b = g_k grad kappa + g_d delta grad u2 and zero-flux boundaries,
all right-hand sides evaluated at p_{n+1}.  Every sign and term placement
here was fixed against the central finite-difference oracle on the discrete
cost (see the gradient tests); the transport coupling of p1 into the p2
equation is the transpose of the pH-taxis coupling of u2 into the u1
equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .forward import InstabilityError, ParamSet, StateTrajectory
from .grid import TimeGrid, div, grad, laplace_neumann
from .kinetics import partials_f1, partials_f2

__all__ = ["AdjointTrajectory", "step_adjoint", "solve_adjoint"]


@dataclass
class AdjointTrajectory:
    """Time-indexed (p1, p2) pairs, slice nt holding the terminal data."""

    p1: np.ndarray
    p2: np.ndarray
    time: TimeGrid

    @property
    def nslices(self) -> int:
        return self.p1.shape[0]


def step_adjoint(p1_next, p2_next, state_slices, theta_slices, cfg: RunConfig, xi_slices=None):
    """One backward step from (p1, p2) at t_{n+1} to t_n.

    ``state_slices`` is the pair (u1_n, u2_n); ``theta_slices`` maps component
    names to their slice-n fields; ``xi_slices`` optionally supplies the
    disturbance pair for the controlled model.
    """
    grid = cfg.grid
    tau = cfg.time.tau
    u1, u2 = state_slices
    sigma = theta_slices["sigma"]
    kappa = theta_slices["kappa"]
    delta = theta_slices["delta"]
    alpha = theta_slices["alpha"]
    beta = theta_slices["beta"]
    mu = theta_slices["mu"]

    d1f1, d2f1 = partials_f1(u1, u2)
    d1f2, d2f2 = partials_f2(u1, u2)

    p1x, p1y = grad(p1_next, grid)
    kx, ky = grad(kappa, grid)
    u2x, u2y = grad(u2, grid)
    drift_x = cfg.gamma_kappa * kx + cfg.gamma_delta * delta * u2x
    drift_y = cfg.gamma_kappa * ky + cfg.gamma_delta * delta * u2y

    rate1 = (
        div(sigma * p1x, sigma * p1y, grid)
        - (drift_x * p1x + drift_y * p1y)
        + mu * d1f1 * p1_next
        + beta * d1f2 * p2_next
    )
    rate2 = (
        cfg.gamma_ph * laplace_neumann(p2_next, grid)
        - alpha * p2_next
        + cfg.gamma_delta * div(delta * u1 * p1x, delta * u1 * p1y, grid)
        + mu * d2f1 * p1_next
        + beta * d2f2 * p2_next
    )
    if xi_slices is not None:
        xi1, xi2 = xi_slices
        rate1 = rate1 - xi1 * p1_next
        rate2 = rate2 + xi2 * p2_next
    return p1_next + tau * rate1, p2_next + tau * rate2


def solve_adjoint(traj: StateTrajectory, theta: ParamSet, target: np.ndarray,
                  cfg: RunConfig, xi=None) -> AdjointTrajectory:
    """Fill the adjoint trajectory backward from its terminal data."""
    grid, time = cfg.grid, cfg.time
    nt = time.nt
    if target.shape != grid.shape:
        raise ValueError(f"target shape {target.shape} does not match grid {grid.shape}")
    if traj.nslices != nt + 1:
        raise ValueError(f"state trajectory has {traj.nslices} slices, expected {nt + 1}")

    p1 = np.empty((nt + 1, *grid.shape))
    p2 = np.empty((nt + 1, *grid.shape))
    p1[nt] = traj.u1[nt] - target
    p2[nt] = 0.0

    for n in range(nt - 1, -1, -1):
        slices = {name: arr[n] for name, arr in theta.items()}
        xi_slices = (xi.xi1[n], xi.xi2[n]) if xi is not None else None
        a, b = step_adjoint(p1[n + 1], p2[n + 1], (traj.u1[n], traj.u2[n]),
                            slices, cfg, xi_slices=xi_slices)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InstabilityError(n, what="adjoint")
        p1[n], p2[n] = a, b
    return AdjointTrajectory(p1=p1, p2=p2, time=time)
