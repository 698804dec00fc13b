import numpy as np
import pytest

from palisade import (Grid2D, InstabilityError, ParamSet, RunConfig, TimeGrid,
                      solve_forward, stability_check, step_state)
from conftest import random_in_box_theta, smooth_field


def small_cfg(nx=12, nt=20, t_final=2.0, **kw):
    grid = Grid2D(nx, nx, 0.1, 0.1)
    return RunConfig(grid=grid, time=TimeGrid(t_final, nt), **kw)


def test_project_box_examples():
    grid = Grid2D(5, 5)
    theta = ParamSet.constant(grid, 2, {"sigma": 0.02, "kappa": -0.5, "mu": 1.0})
    proj = theta.project()
    assert np.all(proj.sigma == 0.01)
    assert np.all(proj.kappa == -0.01)
    assert np.all(proj.mu == 1.0)  # interior point unchanged
    again = proj.project()
    for name, arr in again.items():
        assert np.array_equal(arr, proj.component(name))
    assert proj.in_box()


def test_paramset_shape_mismatch():
    grid = Grid2D(5, 5)
    fields = {n: np.zeros((3, 5, 5)) for n in ("sigma", "kappa", "delta", "alpha", "beta")}
    with pytest.raises(ValueError):
        ParamSet(**fields, mu=np.zeros((2, 5, 5)))


def test_uniform_u1_unchanged_without_growth():
    cfg = small_cfg()
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 5e-3})
    traj = solve_forward(theta, cfg)
    assert np.all(traj.u1 == 0.2)


def test_uniform_u2_decay_recurrence():
    cfg = small_cfg(nt=20, t_final=2.0)  # tau = 0.1
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 1e-3, "alpha": 1.0})
    traj = solve_forward(theta, cfg)
    assert traj.u2[1].flat[0] == pytest.approx(0.45, abs=1e-15)
    n = np.arange(cfg.time.nt + 1)
    expect = 0.5 * (1.0 - cfg.time.tau) ** n
    rel = np.abs(traj.u2.reshape(len(n), -1) - expect[:, None]) / 0.5
    assert rel.max() <= 1e-12


def test_mass_conserved_without_growth():
    cfg = small_cfg(nt=100, t_final=5.0)
    rng = np.random.default_rng(2)
    theta = ParamSet.constant(cfg.grid, cfg.time.nt,
                              {"sigma": 5e-3, "delta": 5e-3, "alpha": 0.5, "beta": 1.0})
    theta.kappa[:] = smooth_field(rng, cfg.grid, -0.01, 0.01)[None]
    cfg.u1_init = 0.2 + 0.2 * smooth_field(rng, cfg.grid, 0.0, 1.0)
    traj = solve_forward(theta, cfg)
    mass = traj.u1.sum(axis=(1, 2)) * cfg.grid.cell_area
    assert np.abs(mass - mass[0]).max() <= 1e-10 * mass[0]


def test_zero_steps_returns_initial_state():
    cfg = small_cfg(nt=0)
    traj = solve_forward(ParamSet.constant(cfg.grid, 0, 0.1), cfg)
    assert traj.nslices == 1
    assert np.all(traj.u1[0] == 0.2) and np.all(traj.u2[0] == 0.5)


def test_lower_bound_theta_stays_finite_nonnegative():
    cfg = small_cfg(nt=100, t_final=10.0)
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, 0.0).project()
    traj = solve_forward(theta, cfg)
    assert np.all(np.isfinite(traj.u1)) and np.all(np.isfinite(traj.u2))
    assert traj.u1.min() >= -1e-12 and traj.u2.min() >= -1e-12


def test_self_convergence_first_order_in_time():
    def final(nt):
        cfg = small_cfg(nx=16, nt=nt, t_final=2.0)
        theta = ParamSet.constant(cfg.grid, nt,
                                  {"sigma": 5e-3, "delta": 2e-3, "alpha": 0.5, "beta": 1.0, "mu": 1.0})
        theta.kappa[:] = 0.008 * np.sin(np.linspace(0, 3, 16))[None, None, :]
        return solve_forward(theta, cfg).u1[-1]

    f20, f40, f80 = final(20), final(40), final(80)
    e1 = np.linalg.norm(f20 - f40)
    e2 = np.linalg.norm(f40 - f80)
    assert 1.5 <= e1 / e2 <= 2.6


def test_decoupled_acid_independent_of_tumor():
    cfg_a = small_cfg(u1_init=0.2)
    cfg_b = small_cfg(u1_init=0.7)
    theta = ParamSet.constant(cfg_a.grid, cfg_a.time.nt, {"sigma": 1e-3, "alpha": 0.7})
    ta = solve_forward(theta, cfg_a)
    tb = solve_forward(theta, cfg_b)
    assert np.array_equal(ta.u2, tb.u2)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_instability_raises_with_step_index():
    cfg = small_cfg(nt=100, t_final=1e6)  # tau = 1e4, far beyond the parabolic limit
    rng = np.random.default_rng(6)
    cfg.u1_init = smooth_field(rng, cfg.grid, 0.1, 0.3)  # spatial variation seeds the blowup
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 1e-2, "alpha": 1.0, "beta": 1.0})
    with pytest.raises(InstabilityError) as err:
        solve_forward(theta, cfg)
    assert 0 <= err.value.step < cfg.time.nt


def test_stability_check_parabolic_bound():
    cfg = small_cfg()
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 0.01})
    tau_max = stability_check(theta, cfg)
    assert tau_max == pytest.approx(0.9 * 0.1 ** 2 / (4 * 0.01))
    assert cfg.time.tau <= tau_max  # reference step width 0.1 is admissible


def test_stability_check_halving_diffusion_doubles_bound():
    cfg = small_cfg()
    cfg.gamma_ph = 0.002  # keep sigma the binding diffusion
    full = stability_check(ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 0.01}), cfg)
    half = stability_check(ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 0.005}), cfg)
    assert half == pytest.approx(2 * full)


def test_stability_check_zero_advection_is_parabolic_only():
    cfg = small_cfg()
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 0.004, "delta": 0.01})
    # uniform kappa and uniform initial acid: estimated drift speed is zero
    assert stability_check(theta, cfg) == pytest.approx(0.9 * 0.1 ** 2 / (4 * 0.01))


def test_step_state_matches_solver():
    cfg = small_cfg(nt=5)
    rng = np.random.default_rng(4)
    theta = random_in_box_theta(rng, cfg.grid, cfg.time.nt)
    traj = solve_forward(theta, cfg)
    slices = {name: arr[0] for name, arr in theta.items()}
    u1, u2 = step_state(traj.u1[0], traj.u2[0], slices, cfg)
    assert np.array_equal(u1, traj.u1[1])
    assert np.array_equal(u2, traj.u2[1])


def test_imex_matches_explicit_at_small_tau():
    def final(scheme):
        cfg = small_cfg(nx=14, nt=80, t_final=2.0)
        theta = ParamSet.constant(cfg.grid, cfg.time.nt,
                                  {"sigma": 5e-3, "delta": 2e-3, "alpha": 0.5, "beta": 1.0, "mu": 1.0})
        theta.kappa[:] = 0.008 * np.sin(np.linspace(0, 3, 14))[None, None, :]
        return solve_forward(theta, cfg, scheme=scheme).u1[-1]

    diff = np.abs(final("imex") - final("explicit")).max()
    assert diff <= 5e-3  # one-sided Euler difference, O(tau)


def test_imex_stable_beyond_explicit_limit():
    cfg = small_cfg(nx=12, nt=10, t_final=50.0)  # tau = 5 >> parabolic limit
    rng = np.random.default_rng(8)
    cfg.u1_init = smooth_field(rng, cfg.grid, 0.1, 0.4)
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 1e-2})
    assert cfg.time.tau > stability_check(theta, cfg)
    traj = solve_forward(theta, cfg, scheme="imex")
    assert np.all(np.isfinite(traj.u1)) and np.all(np.isfinite(traj.u2))
    # diffusion alone conserves tumor mass in the implicit solve too
    mass = traj.u1.sum(axis=(1, 2)) * cfg.grid.cell_area
    assert np.abs(mass - mass[0]).max() <= 1e-10 * mass[0]


def test_unknown_scheme_rejected():
    cfg = small_cfg(nt=2)
    with pytest.raises(ValueError):
        solve_forward(ParamSet.constant(cfg.grid, 2, 0.0), cfg, scheme="magic")


def test_diagnostics_track_extremes():
    cfg = small_cfg(nt=10)
    theta = ParamSet.constant(cfg.grid, cfg.time.nt, {"sigma": 2e-3, "alpha": 0.5, "beta": 1.0, "mu": 1.0})
    traj = solve_forward(theta, cfg)
    diag = traj.diagnostics
    assert np.array_equal(diag["u1_max"], traj.u1.max(axis=(1, 2)))
    assert np.array_equal(diag["u2_min"], traj.u2.min(axis=(1, 2)))


@pytest.mark.parametrize("seed", range(10))
def test_nonnegativity_random_admissible(seed):
    rng = np.random.default_rng(seed)
    cfg = small_cfg(nx=14, nt=20, t_final=2.0)
    cfg.u1_init = smooth_field(rng, cfg.grid, 0.05, 0.6)
    cfg.u2_init = smooth_field(rng, cfg.grid, 0.05, 0.6)
    theta = random_in_box_theta(rng, cfg.grid, cfg.time.nt)
    assert cfg.time.tau <= stability_check(theta, cfg)
    traj = solve_forward(theta, cfg)
    assert traj.u1.min() >= -1e-12
    assert traj.u2.min() >= -1e-12
    # boundedness at desk scale
    assert traj.u1.max() <= 1e3 and traj.u2.max() <= 1e3
