"""Pattern neutralization: find a disturbance that flattens a tumor pattern.

Freezes a pattern-forming parameter set, then optimizes the disturbance pair
(xi1, xi2) so the final tumor density lands on a uniform neutral target.
Compares direct removal (full mode) against acid-only actuation (pH-only).
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from palisade import (Grid2D, ParamSet, RunConfig, TimeGrid, export_pgm, neutralize,
                      norm_l2, solve_forward)

out = Path(__file__).parent / "output" / "neutralize"
out.mkdir(parents=True, exist_ok=True)

grid = Grid2D(nx=32, ny=32, hx=0.1, hy=0.1)
time = TimeGrid(t_final=8.0, nt=80)
cfg = RunConfig(grid=grid, time=time, max_iters=100, epsilon=1e-12)

L = grid.nx * grid.hx
x = (np.arange(grid.nx) + 0.5) * grid.hx
X, Y = np.meshgrid(x, x)

theta = ParamSet.constant(grid, time.nt, {"sigma": 3e-3, "delta": 2e-3, "alpha": 0.6, "beta": 1.0})
ring = np.exp(-((np.hypot(X - L / 2, Y - L / 2) - 0.25 * L) ** 2) / 0.06)
theta.mu[:] = np.clip(0.25 + 1.2 * ring, *theta.bounds["mu"])

neutral = np.full(grid.shape, 0.2)  # tissue held at the initial density
uncontrolled = solve_forward(theta, cfg)
baseline = norm_l2(uncontrolled.u1[-1] - neutral, grid)
print(f"uncontrolled distance to neutral tissue: {baseline:.4f}")
export_pgm(uncontrolled.u1[-1], out / "pattern_uncontrolled.pgm")

for mode in ("full", "ph-only"):
    res = neutralize(theta, neutral, replace(cfg), mode=mode)
    dist = norm_l2(res.traj.u1[-1] - neutral, grid)
    print(f"mode={mode:8s} iterations={len(res.history) - 1:3d} "
          f"distance={dist:.4f}  reduction={100 * (1 - dist / baseline):.1f}%")
    tag = mode.replace("-", "_")
    export_pgm(res.traj.u1[-1], out / f"pattern_{tag}.pgm")
    export_pgm(res.xi.xi2[time.nt // 2], out / f"xi2_mid_{tag}.pgm")

print(f"wrote panels to {out}")
