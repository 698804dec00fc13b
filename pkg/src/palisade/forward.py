"""Explicit time stepping of the coupled tumor/acid state system.

One step advances

    u1 <- u1 + tau * [ div(sigma grad u1 + g_k u1 grad kappa + g_d delta u1 grad u2)
                       + mu f1(u1, u2) - xi1 u1 ]
    u2 <- u2 + tau * [ g_ph laplace u2 - alpha u2 + beta f2(u1, u2) + xi2 u2 ]

with every flux component vanishing at boundary faces (zero total normal
flux), which makes the cell-weighted mass of u1 exactly conserved whenever
mu and xi1 are zero.  The optional disturbance pair (xi1, xi2) belongs to the
pattern-control extension; the base model is the xi-free special case.

The default scheme is fully explicit, so the step width must respect the
parabolic and advective limits estimated by :func:`stability_check`; a NaN or
Inf in any produced slice raises :class:`InstabilityError` naming the
offending step.  For stiff diffusion a semi-implicit variant
(``scheme="imex"``) treats the two diffusion terms implicitly, assembling the
implicit operators from the same discrete divergence/gradient matrices so the
exact mass telescoping carries over; transport and reactions stay explicit.
The estimation loop always runs the explicit scheme, which the backward solve
mirrors step for step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from .config import DEFAULT_BOUNDS, PARAM_NAMES, RunConfig
from .grid import Grid2D, TimeGrid, div, grad, laplace_neumann
from .kinetics import eval_f1, eval_f2

__all__ = [
    "ParamSet",
    "StateTrajectory",
    "InstabilityError",
    "step_state",
    "solve_forward",
    "stability_check",
]


class InstabilityError(RuntimeError):
    """Raised when a time step produces non-finite values."""

    def __init__(self, step: int, what: str = "state"):
        self.step = step
        super().__init__(f"{what} solve produced non-finite values at step {step}")


@dataclass
class ParamSet:
    """The six space-time coefficient fields, each of shape (nt+1, ny, nx).

    sigma: tumor diffusion; kappa: tissue drift potential; delta: pH-taxis
    strength; alpha: acid removal rate; beta: acid production rate; mu:
    growth rate.  ``bounds`` carries the per-component admissible box; the
    terminal slice is inert under the explicit scheme (the step at t_n uses
    slice n) but is kept so parameters align with state trajectories.
    """

    sigma: np.ndarray
    kappa: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))

    def __post_init__(self):
        shapes = {name: getattr(self, name).shape for name in PARAM_NAMES}
        if len(set(shapes.values())) != 1:
            raise ValueError(f"parameter components have mismatched shapes: {shapes}")

    @classmethod
    def constant(cls, grid: Grid2D, nt: int, values: Mapping[str, float] | float = 0.0,
                 bounds: Mapping[str, tuple[float, float]] | None = None) -> "ParamSet":
        if not isinstance(values, Mapping):
            values = {name: float(values) for name in PARAM_NAMES}
        fields = {
            name: np.full((nt + 1, *grid.shape), float(values.get(name, 0.0)))
            for name in PARAM_NAMES
        }
        return cls(**fields, bounds=dict(bounds or DEFAULT_BOUNDS))

    @property
    def nslices(self) -> int:
        return self.sigma.shape[0]

    def component(self, name: str) -> np.ndarray:
        if name not in PARAM_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return ((name, getattr(self, name)) for name in PARAM_NAMES)

    def copy(self) -> "ParamSet":
        return ParamSet(**{name: getattr(self, name).copy() for name in PARAM_NAMES},
                        bounds=dict(self.bounds))

    def project(self) -> "ParamSet":
        """Componentwise clamp onto the admissible box; idempotent."""
        clipped = {
            name: np.clip(getattr(self, name), *self.bounds[name]) for name in PARAM_NAMES
        }
        return ParamSet(**clipped, bounds=dict(self.bounds))

    def in_box(self, tol: float = 0.0) -> bool:
        return all(
            arr.min() >= self.bounds[name][0] - tol and arr.max() <= self.bounds[name][1] + tol
            for name, arr in self.items()
        )


@dataclass
class StateTrajectory:
    """Time-indexed (u1, u2) pairs, slice 0 holding the initial state."""

    u1: np.ndarray
    u2: np.ndarray
    time: TimeGrid
    diagnostics: dict = field(default_factory=dict)

    @property
    def nslices(self) -> int:
        return self.u1.shape[0]


def step_state(u1, u2, theta_slices, cfg: RunConfig, xi_slices=None):
    """One explicit step from (u1, u2) under the parameter slices at this time.

    ``theta_slices`` maps component names to (ny, nx) arrays; ``xi_slices``
    optionally supplies the disturbance pair ``(xi1, xi2)``.
    """
    grid = cfg.grid
    tau = cfg.time.tau
    sigma = theta_slices["sigma"]
    kappa = theta_slices["kappa"]
    delta = theta_slices["delta"]
    alpha = theta_slices["alpha"]
    beta = theta_slices["beta"]
    mu = theta_slices["mu"]

    u1x, u1y = grad(u1, grid)
    u2x, u2y = grad(u2, grid)
    kx, ky = grad(kappa, grid)
    flux_x = sigma * u1x + cfg.gamma_kappa * u1 * kx + cfg.gamma_delta * delta * u1 * u2x
    flux_y = sigma * u1y + cfg.gamma_kappa * u1 * ky + cfg.gamma_delta * delta * u1 * u2y

    rate1 = div(flux_x, flux_y, grid) + mu * eval_f1(u1, u2)
    rate2 = cfg.gamma_ph * laplace_neumann(u2, grid) - alpha * u2 + beta * eval_f2(u1, u2)
    if xi_slices is not None:
        xi1, xi2 = xi_slices
        rate1 = rate1 - xi1 * u1
        rate2 = rate2 + xi2 * u2
    return u1 + tau * rate1, u2 + tau * rate2


def _grad_matrix_1d(n: int, h: float) -> sparse.csr_matrix:
    # centered difference with zero normal component at the boundary nodes
    rows = np.repeat(np.arange(1, n - 1), 2)
    cols = np.ravel(np.column_stack([np.arange(0, n - 2), np.arange(2, n)]))
    vals = np.tile([-1.0, 1.0], n - 2) / (2.0 * h)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _div_matrix_1d(n: int, h: float) -> sparse.csr_matrix:
    # centered difference with even ghost reflection at the walls
    m = sparse.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -1.0
        m[i, i + 1] = 1.0
    m[0, 0], m[0, 1] = -1.0, 1.0
    m[n - 1, n - 2], m[n - 1, n - 1] = -1.0, 1.0
    return (m / (2.0 * h)).tocsr()


def _diffusion_matrix(coeff: np.ndarray, grid: Grid2D) -> sparse.csr_matrix:
    """Sparse matrix of u -> div(coeff * grad(u)); matches the array operators."""
    gx = sparse.kron(sparse.identity(grid.ny), _grad_matrix_1d(grid.nx, grid.hx))
    dx = sparse.kron(sparse.identity(grid.ny), _div_matrix_1d(grid.nx, grid.hx))
    gy = sparse.kron(_grad_matrix_1d(grid.ny, grid.hy), sparse.identity(grid.nx))
    dy = sparse.kron(_div_matrix_1d(grid.ny, grid.hy), sparse.identity(grid.nx))
    c = sparse.diags(np.asarray(coeff, dtype=float).ravel())
    return (dx @ c @ gx + dy @ c @ gy).tocsr()


def _imex_stepper(theta: ParamSet, cfg: RunConfig):
    """Backward-Euler diffusion solves; transport and reactions stay explicit."""
    grid, tau = cfg.grid, cfg.time.tau
    n = grid.nx * grid.ny
    eye = sparse.identity(n, format="csc")
    acid_solve = factorized(eye - tau * cfg.gamma_ph * _diffusion_matrix(np.ones(grid.shape), grid).tocsc())

    def tumor_factor(sigma_slice):
        return factorized((eye - tau * _diffusion_matrix(sigma_slice, grid)).tocsc())

    # one factorization covers all steps when the diffusion field is static
    sigma_static = all(np.array_equal(theta.sigma[k], theta.sigma[0])
                       for k in range(1, cfg.time.nt))
    static_solve = tumor_factor(theta.sigma[0]) if sigma_static else None

    def step(n_step, u1, u2, slices, xi_slices):
        tumor_solve = static_solve if static_solve is not None else tumor_factor(slices["sigma"])

        u1x, u1y = grad(u1, grid)
        u2x, u2y = grad(u2, grid)
        kx, ky = grad(slices["kappa"], grid)
        flux_x = cfg.gamma_kappa * u1 * kx + cfg.gamma_delta * slices["delta"] * u1 * u2x
        flux_y = cfg.gamma_kappa * u1 * ky + cfg.gamma_delta * slices["delta"] * u1 * u2y
        rate1 = div(flux_x, flux_y, grid) + slices["mu"] * eval_f1(u1, u2)
        rate2 = -slices["alpha"] * u2 + slices["beta"] * eval_f2(u1, u2)
        if xi_slices is not None:
            rate1 = rate1 - xi_slices[0] * u1
            rate2 = rate2 + xi_slices[1] * u2
        a = tumor_solve((u1 + tau * rate1).ravel()).reshape(grid.shape)
        b = acid_solve((u2 + tau * rate2).ravel()).reshape(grid.shape)
        return a, b

    return step


def solve_forward(theta: ParamSet, cfg: RunConfig, xi=None, scheme: str = "explicit") -> StateTrajectory:
    """Integrate the state system from t=0 to t=t_final.

    ``xi`` may be a control set with ``xi1``/``xi2`` series; None runs the
    base model.  ``scheme`` selects explicit stepping (default) or the
    semi-implicit diffusion variant.  Per-step min/max of both species are
    recorded in ``trajectory.diagnostics``.
    """
    if scheme not in ("explicit", "imex"):
        raise ValueError(f"unknown scheme {scheme!r}")
    grid, time = cfg.grid, cfg.time
    nt = time.nt
    if theta.nslices < nt + 1:
        raise ValueError(f"parameter set has {theta.nslices} slices, need {nt + 1}")
    u1_0, u2_0 = cfg.initial_state()
    imex_step = _imex_stepper(theta, cfg) if scheme == "imex" and nt > 0 else None

    u1 = np.empty((nt + 1, *grid.shape))
    u2 = np.empty((nt + 1, *grid.shape))
    u1[0], u2[0] = u1_0, u2_0
    u1_min = np.empty(nt + 1)
    u1_max = np.empty(nt + 1)
    u2_min = np.empty(nt + 1)
    u2_max = np.empty(nt + 1)
    u1_min[0], u1_max[0] = u1_0.min(), u1_0.max()
    u2_min[0], u2_max[0] = u2_0.min(), u2_0.max()

    for n in range(nt):
        slices = {name: arr[n] for name, arr in theta.items()}
        xi_slices = (xi.xi1[n], xi.xi2[n]) if xi is not None else None
        if imex_step is not None:
            a, b = imex_step(n, u1[n], u2[n], slices, xi_slices)
        else:
            a, b = step_state(u1[n], u2[n], slices, cfg, xi_slices=xi_slices)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InstabilityError(n)
        u1[n + 1], u2[n + 1] = a, b
        u1_min[n + 1], u1_max[n + 1] = a.min(), a.max()
        u2_min[n + 1], u2_max[n + 1] = b.min(), b.max()

    diag = {"u1_min": u1_min, "u1_max": u1_max, "u2_min": u2_min, "u2_max": u2_max}
    return StateTrajectory(u1=u1, u2=u2, time=time, diagnostics=diag)


def stability_check(theta: ParamSet, cfg: RunConfig, safety: float = 0.9) -> float:
    """Largest step width the explicit scheme tolerates, with a safety margin.

    Combines the parabolic limit ``h^2 / (4 max(sigma, gamma_ph))`` with an
    advective limit ``h / a`` where ``a`` estimates the drift speed from the
    kappa slices and the pH-taxis flux at the initial acid field.  The
    advective term drops out when the estimated speed is zero.
    """
    grid = cfg.grid
    h = min(grid.hx, grid.hy)
    diff = max(float(theta.sigma.max()), cfg.gamma_ph)
    tau_parabolic = h * h / (4.0 * diff)

    speed = 0.0
    for n in range(theta.nslices):
        kx, ky = grad(theta.kappa[n], grid)
        speed = max(speed, cfg.gamma_kappa * float(np.hypot(kx, ky).max()))
    _, u2_0 = cfg.initial_state()
    gx, gy = grad(u2_0, grid)
    speed += cfg.gamma_delta * float(theta.delta.max()) * float(np.hypot(gx, gy).max())

    tau_max = tau_parabolic if speed == 0.0 else min(tau_parabolic, h / speed)
    return safety * tau_max
