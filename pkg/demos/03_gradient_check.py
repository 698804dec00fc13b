"""Directional-derivative check of the adjoint gradient.

Compares the adjoint-assembled gradient against central finite differences of
the reduced cost, one parameter channel at a time and in joint directions.
"""

import numpy as np

from palisade import (GradientSet, Grid2D, ParamSet, RunConfig, TimeGrid,
                      assemble_gradient, eval_cost, solve_adjoint, solve_forward)
from palisade.config import PARAM_NAMES
from palisade.optimizer import theta_inner

rng = np.random.default_rng(3)
grid = Grid2D(nx=16, ny=16, hx=0.1, hy=0.1)
time = TimeGrid(t_final=0.5, nt=20)
cfg = RunConfig(grid=grid, time=time)
FD_EPS = 1e-5


def smooth(lo, hi):
    x = (np.arange(grid.nx) + 0.5) * grid.hx
    X, Y = np.meshgrid(x, x)
    f = sum(rng.uniform(-1, 1) * np.cos(rng.integers(1, 3) * X + rng.uniform(0, 6))
            * np.cos(rng.integers(1, 3) * Y + rng.uniform(0, 6)) for _ in range(3))
    f = (f - f.min()) / (f.max() - f.min())
    return np.repeat((lo + (hi - lo) * f)[None], time.nt + 1, axis=0)


theta = ParamSet(sigma=smooth(1e-4, 1e-2), kappa=smooth(-1e-2, 1e-2), delta=smooth(1e-4, 1e-2),
                 alpha=smooth(0.1, 1.0), beta=smooth(0.1, 1.0), mu=smooth(0.1, 1.0))
maker = ParamSet.constant(grid, time.nt, {"sigma": 3e-3, "delta": 2e-3,
                                          "alpha": 0.8, "beta": 1.0, "mu": 1.3})
target = solve_forward(maker, cfg).u1[-1]

traj = solve_forward(theta, cfg)
adj = solve_adjoint(traj, theta, target, cfg)
grad = assemble_gradient(traj, adj, theta, cfg.lam, cfg)


def reduced_cost(th):
    return eval_cost(solve_forward(th, cfg), th, target, cfg.lam, grid).total


def check(eta, label):
    adj_deriv = theta_inner(grad, eta, time, grid)
    plus = ParamSet(**{n: theta.component(n) + FD_EPS * eta.component(n) for n in PARAM_NAMES},
                    bounds=dict(theta.bounds))
    minus = ParamSet(**{n: theta.component(n) - FD_EPS * eta.component(n) for n in PARAM_NAMES},
                     bounds=dict(theta.bounds))
    fd = (reduced_cost(plus) - reduced_cost(minus)) / (2 * FD_EPS)
    rel = abs(adj_deriv - fd) / abs(adj_deriv)
    print(f"  {label:8s} adjoint={adj_deriv:+.6e}  fd={fd:+.6e}  rel.err={rel:.2e}")


print("single-channel directions:")
for name in PARAM_NAMES:
    eta = GradientSet(**{n: (smooth(-1, 1) if n == name else np.zeros_like(theta.sigma))
                         for n in PARAM_NAMES})
    eta.component(name)[-1] = 0.0
    check(eta, name)

print("joint directions:")
for k in range(4):
    eta = GradientSet(**{n: smooth(-1, 1) for n in PARAM_NAMES})
    for n in PARAM_NAMES:
        eta.component(n)[-1] = 0.0
    check(eta, f"joint-{k}")
