"""Synthesizing new patterns by combining estimated parameter sets.

Two parent parameter sets generate distinct patterns; their pointwise mean
generates a third pattern unlike either parent.  The matching mean of the
parents' neutralizing controls still disrupts the combined pattern.
"""

from pathlib import Path

import numpy as np

from palisade import (Grid2D, ParamSet, RunConfig, TimeGrid, combine_controls,
                      combine_params, export_pgm, neutralize, norm_l2, solve_forward,
                      solve_forward_controlled)

out = Path(__file__).parent / "output" / "synthesis"
out.mkdir(parents=True, exist_ok=True)

grid = Grid2D(nx=32, ny=32, hx=0.1, hy=0.1)
time = TimeGrid(t_final=6.0, nt=60)
cfg = RunConfig(grid=grid, time=time, max_iters=60, epsilon=1e-12)

L = grid.nx * grid.hx
x = (np.arange(grid.nx) + 0.5) * grid.hx
X, Y = np.meshgrid(x, x)


def parent(cx, cy, drift_sign):
    th = ParamSet.constant(grid, time.nt, {"sigma": 3e-3, "delta": 2e-3, "alpha": 0.6, "beta": 0.9})
    th.kappa[:] = drift_sign * 6e-3 * np.sin(2 * np.pi * X / L) * np.cos(np.pi * Y / L)
    th.mu[:] = np.clip(0.3 + 1.2 * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / 0.1),
                       *th.bounds["mu"])
    return th


theta_k = parent(0.35 * L, 0.35 * L, +1)
theta_l = parent(0.65 * L, 0.6 * L, -1)
final_k = solve_forward(theta_k, cfg).u1[-1]
final_l = solve_forward(theta_l, cfg).u1[-1]

theta_kl = combine_params(theta_k, theta_l)
traj_kl = solve_forward(theta_kl, cfg)
print("distance of combined pattern to parent K:", f"{norm_l2(traj_kl.u1[-1] - final_k, grid):.4f}")
print("distance of combined pattern to parent L:", f"{norm_l2(traj_kl.u1[-1] - final_l, grid):.4f}")

export_pgm(final_k, out / "pattern_K.pgm")
export_pgm(final_l, out / "pattern_L.pgm")
export_pgm(traj_kl.u1[-1], out / "pattern_KL.pgm")

neutral = np.full(grid.shape, 0.2)
xi_k = neutralize(theta_k, neutral, cfg, mode="full").xi
xi_l = neutralize(theta_l, neutral, cfg, mode="full").xi
xi_kl = combine_controls(xi_k, xi_l)

baseline = norm_l2(traj_kl.u1[-1] - neutral, grid)
disrupted = solve_forward_controlled(theta_kl, xi_kl, cfg)
dist = norm_l2(disrupted.u1[-1] - neutral, grid)
print(f"combined control on combined pattern: {baseline:.4f} -> {dist:.4f} "
      f"({100 * (1 - dist / baseline):.1f}% reduction)")
export_pgm(disrupted.u1[-1], out / "pattern_KL_disrupted.pgm")
print(f"wrote panels to {out}")
