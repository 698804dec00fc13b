"""Run configuration and the default simulation constants.

Defaults reproduce the reference setup: unit spacings 0.1 in both directions,
t_final = 10 with step 0.1, uniform initial densities u1 = 0.2 and u2 = 0.5,
all parameter fields started at 0 and regularized with weight 1e-4, scalar
migration factors gamma_kappa = 0.01, gamma_delta = 0.001, gamma_ph = 0.01.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .grid import Grid2D, TimeGrid

__all__ = ["PARAM_NAMES", "DEFAULT_BOUNDS", "DEFAULT_LAMBDA", "RunConfig"]

PARAM_NAMES = ("sigma", "kappa", "delta", "alpha", "beta", "mu")

# Box constraints of the admissible parameter set, per component.
DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "sigma": (1e-4, 1e-2),
    "kappa": (-1e-2, 1e-2),
    "delta": (1e-4, 1e-2),
    "alpha": (1e-4, 10.0),
    "beta": (1e-4, 10.0),
    "mu": (1e-4, 10.0),
}

DEFAULT_LAMBDA = 1e-4

FieldOrScalar = Union[float, np.ndarray]


def _as_field(value: FieldOrScalar, grid: Grid2D) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.shape, float(arr))
    if arr.shape != grid.shape:
        raise ValueError(f"initial field shape {arr.shape} does not match grid {grid.shape}")
    return arr.copy()


@dataclass
class RunConfig:
    """Everything a forward/backward/estimation run needs besides its target.

    ``lam`` holds the per-component Tikhonov weights; a bare float is
    broadcast to all six components.  ``epsilon`` is the stopping threshold
    on the total cost; if None it is derived from the target scale at run
    time as ``1e-4 * ||target||_{L2}^2``.
    """

    grid: Grid2D
    time: TimeGrid
    u1_init: FieldOrScalar = 0.2
    u2_init: FieldOrScalar = 0.5
    lam: Union[float, Mapping[str, float]] = DEFAULT_LAMBDA
    epsilon: float | None = None
    gamma_kappa: float = 0.01
    gamma_delta: float = 0.001
    gamma_ph: float = 0.01
    theta_init: Union[float, Mapping[str, float]] = 0.0
    max_iters: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.gamma_ph <= 0:
            raise ValueError("gamma_ph must be positive")
        for name, w in self.lambdas().items():
            if w < 0:
                raise ValueError(f"lam[{name}] must be nonnegative")

    def lambdas(self) -> dict[str, float]:
        if isinstance(self.lam, Mapping):
            missing = set(PARAM_NAMES) - set(self.lam)
            if missing:
                raise ValueError(f"lam missing components: {sorted(missing)}")
            return {k: float(self.lam[k]) for k in PARAM_NAMES}
        return {k: float(self.lam) for k in PARAM_NAMES}

    def theta_inits(self) -> dict[str, float]:
        if isinstance(self.theta_init, Mapping):
            return {k: float(self.theta_init.get(k, 0.0)) for k in PARAM_NAMES}
        return {k: float(self.theta_init) for k in PARAM_NAMES}

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        return _as_field(self.u1_init, self.grid), _as_field(self.u2_init, self.grid)
