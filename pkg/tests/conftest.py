"""Shared fixtures: smooth random in-box parameter draws and the synthetic
self-recovery problem reused across optimizer, control, and acceptance tests."""

import numpy as np
import pytest

from palisade import Grid2D, ParamSet, RunConfig, TimeGrid, pgd_run, solve_forward
from palisade.config import PARAM_NAMES

# moderate in-box draw ranges for randomized fixtures; rate parameters stay at
# biological scale so the explicit scheme keeps a positivity margin
DRAW_RANGES = {
    "sigma": (1e-4, 1e-2),
    "kappa": (-1e-2, 1e-2),
    "delta": (1e-4, 1e-2),
    "alpha": (1e-4, 2.0),
    "beta": (1e-4, 2.0),
    "mu": (1e-4, 2.0),
}


def smooth_field(rng, grid, lo, hi, modes=3):
    """Random low-frequency field with values in [lo, hi]."""
    x = (np.arange(grid.nx) + 0.5) * grid.hx
    y = (np.arange(grid.ny) + 0.5) * grid.hy
    X, Y = np.meshgrid(x, y)
    Lx, Ly = grid.nx * grid.hx, grid.ny * grid.hy
    f = np.zeros(grid.shape)
    for _ in range(modes):
        ax, ay = rng.integers(1, 3, size=2)
        p1, p2 = rng.uniform(0, 2 * np.pi, size=2)
        f += rng.uniform(-1, 1) * np.cos(np.pi * ax * X / Lx + p1) * np.cos(np.pi * ay * Y / Ly + p2)
    f = (f - f.min()) / (f.max() - f.min() + 1e-12)
    return lo + (hi - lo) * f


def smooth_series(rng, grid, nt, lo, hi, modes=3, time_amp=0.2):
    """Smooth field series (nt+1, ny, nx) with mild temporal modulation."""
    base = smooth_field(rng, grid, lo, hi, modes)
    tmod = 1.0 + time_amp * np.sin(np.linspace(0, np.pi, nt + 1))
    return np.clip(base[None] * tmod[:, None, None], min(lo, hi), max(lo, hi))


def random_in_box_theta(rng, grid, nt, ranges=DRAW_RANGES):
    theta = ParamSet.constant(grid, nt, 0.0)
    for name in PARAM_NAMES:
        lo, hi = ranges[name]
        theta.component(name)[:] = smooth_series(rng, grid, nt, lo, hi)
    return theta


def _bump(X, Y, cx, cy, r):
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / r)


def make_recovery_problem(nx=32, nt=100, t_final=10.0, h=0.1, max_iters=200):
    """Synthetic target generated by a known in-box parameter set."""
    grid = Grid2D(nx, nx, h, h)
    time = TimeGrid(t_final, nt)
    cfg = RunConfig(grid=grid, time=time, max_iters=max_iters)
    L = nx * h
    x = (np.arange(nx) + 0.5) * h
    X, Y = np.meshgrid(x, x)
    theta = ParamSet.constant(grid, nt, 0.0)
    theta.sigma[:] = 3e-3
    theta.kappa[:] = 6e-3 * np.cos(2 * np.pi * X / L) * np.cos(np.pi * Y / L)
    theta.delta[:] = 2e-3
    theta.alpha[:] = 0.5 + 0.4 * _bump(X, Y, 0.35 * L, 0.6 * L, 0.1 * L * L / 3.2)
    theta.beta[:] = 0.7 + 0.5 * _bump(X, Y, 0.7 * L, 0.3 * L, 0.1 * L * L / 3.2)
    mu = (0.25 + 1.1 * _bump(X, Y, 0.3 * L, 0.3 * L, 0.06 * L * L / 3.2)
          + 0.9 * _bump(X, Y, 0.7 * L, 0.65 * L, 0.09 * L * L / 3.2))
    theta.mu[:] = np.clip(mu, *theta.bounds["mu"])
    target = solve_forward(theta, cfg).u1[-1]
    return cfg, theta, target


@pytest.fixture(scope="session")
def recovery():
    """One full estimation run on the synthetic recovery problem (32x32, nt=100)."""
    import time

    cfg, theta_true, target = make_recovery_problem(max_iters=120)
    t0 = time.perf_counter()
    result = pgd_run(target, cfg)
    elapsed = time.perf_counter() - t0
    return {"cfg": cfg, "theta_true": theta_true, "target": target,
            "result": result, "elapsed": elapsed}


def ring_image(n=64):
    """Deterministic synthetic micrograph: dark garland band on a light
    textured background, RGB uint8."""
    from palisade import RasterImage

    idx = np.arange(n)
    X, Y = np.meshgrid(idx, idx)
    c = (n - 1) / 2
    r = np.hypot(X - c, Y - c)
    band = np.exp(-((r - 0.3 * n) ** 2) / (2 * (0.06 * n) ** 2))
    gray = 230.0 - 170.0 * band
    gray += 12.0 * np.sin(0.9 * X) * np.cos(1.3 * Y)
    gray = np.clip(gray, 0, 255)
    rgb = np.stack([gray, np.clip(gray * 0.92, 0, 255), np.clip(gray * 0.96, 0, 255)], axis=-1)
    return RasterImage.from_array(np.floor(rgb + 0.5).astype(np.uint8))
