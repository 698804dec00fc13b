"""Forward simulation of the coupled tumor/acid model.

Builds a spatially structured set of coefficient fields (localized growth,
drift potential, pH-taxis), integrates the state system from a uniform
initial density, and writes snapshot images plus binary field archives.
"""

from pathlib import Path

import numpy as np

from palisade import (Grid2D, ParamSet, RunConfig, TimeGrid, export_pgm, save_series,
                      solve_forward, stability_check)

out = Path(__file__).parent / "output" / "forward"
out.mkdir(parents=True, exist_ok=True)

grid = Grid2D(nx=64, ny=64, hx=0.1, hy=0.1)
time = TimeGrid(t_final=10.0, nt=100)
cfg = RunConfig(grid=grid, time=time)

L = grid.nx * grid.hx
x = (np.arange(grid.nx) + 0.5) * grid.hx
X, Y = np.meshgrid(x, x)

theta = ParamSet.constant(grid, time.nt, 0.0)
theta.sigma[:] = 3e-3
theta.kappa[:] = 8e-3 * np.cos(2 * np.pi * X / L) * np.cos(2 * np.pi * Y / L)
theta.delta[:] = 3e-3
theta.alpha[:] = 0.6
theta.beta[:] = 1.0
ring = np.exp(-((np.hypot(X - L / 2, Y - L / 2) - 0.28 * L) ** 2) / 0.08)
theta.mu[:] = np.clip(0.2 + 1.3 * ring, *theta.bounds["mu"])

tau_max = stability_check(theta, cfg)
print(f"step width tau = {time.tau}, stability estimate tau_max = {tau_max:.3f}")

traj = solve_forward(theta, cfg)
mass = traj.u1.sum(axis=(1, 2)) * grid.cell_area
print(f"tumor density range at T: [{traj.u1[-1].min():.3f}, {traj.u1[-1].max():.3f}]")
print(f"acid  density range at T: [{traj.u2[-1].min():.3f}, {traj.u2[-1].max():.3f}]")
print(f"tumor mass 0 -> T: {mass[0]:.4f} -> {mass[-1]:.4f}")

for frac in (0.0, 0.25, 0.5, 1.0):
    n = int(frac * time.nt)
    export_pgm(traj.u1[n], out / f"tumor_t{n:03d}.pgm")
export_pgm(traj.u2[-1], out / "acid_final.pgm")
save_series(out / "u1.pfld", traj.u1, grid, time.tau)
save_series(out / "u2.pfld", traj.u2, grid, time.tau)
print(f"wrote snapshots and archives to {out}")
