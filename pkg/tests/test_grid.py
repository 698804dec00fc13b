import numpy as np
import pytest

from palisade import Grid2D, TimeGrid, div, grad, inner, laplace_neumann, norm_l2, norm_linf


def mesh(grid):
    x = (np.arange(grid.nx) + 0.5) * grid.hx
    y = (np.arange(grid.ny) + 0.5) * grid.hy
    return np.meshgrid(x, y)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(2, 5)
    with pytest.raises(ValueError):
        Grid2D(5, 5, hx=0.0)
    g = Grid2D(4, 3, 0.1, 0.2)
    assert g.shape == (3, 4)
    assert g.cell_area == pytest.approx(0.02)


def test_time_grid():
    t = TimeGrid(10.0, 100)
    assert abs(t.tau * t.nt - t.t_final) <= 1e-15 * t.t_final
    assert TimeGrid(1.0, 0).tau == 0.0
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)


def test_grad_constant_is_zero():
    g = Grid2D(9, 9)
    gx, gy = grad(np.full(g.shape, 3.25), g)
    assert np.all(gx == 0.0) and np.all(gy == 0.0)


def test_grad_linear_exact_interior():
    g = Grid2D(9, 7)
    X, Y = mesh(g)
    gx, gy = grad(X, g)
    assert np.allclose(gx[:, 1:-1], 1.0, rtol=0, atol=1e-14)
    assert np.all(gy == 0.0)
    # reflected ghost zeroes the normal component at the walls
    assert np.all(gx[:, [0, -1]] == 0.0)


def test_grad_quadratic_exact_interior():
    g = Grid2D(9, 9, 0.1, 0.1)
    X, _ = mesh(g)
    gx, _ = grad(X ** 2, g)
    assert np.allclose(gx[:, 1:-1], 2 * X[:, 1:-1], rtol=0, atol=1e-13)


def test_div_zero_and_constant():
    g = Grid2D(8, 8)
    zero = np.zeros(g.shape)
    assert np.all(div(zero, zero, g) == 0.0)
    ones = np.ones(g.shape)
    assert np.all(div(ones, ones, g) == 0.0)


def test_div_shape_mismatch():
    g = Grid2D(8, 8)
    with pytest.raises(ValueError):
        div(np.zeros(g.shape), np.zeros((3, 3)), g)


def test_div_total_vanishes_for_no_flux():
    g = Grid2D(13, 9, 0.1, 0.07)
    rng = np.random.default_rng(1)
    vx = rng.standard_normal(g.shape)
    vy = rng.standard_normal(g.shape)
    vx[:, 0] = vx[:, -1] = 0.0
    vy[0, :] = vy[-1, :] = 0.0
    total = abs(np.sum(div(vx, vy, g)) * g.cell_area)
    scale = norm_l2(vx, g) + norm_l2(vy, g)
    assert total <= 1e-12 * scale


def test_laplace_constant_and_quadratic():
    g = Grid2D(11, 11, 0.1, 0.1)
    assert np.all(laplace_neumann(np.full(g.shape, 2.0), g) == 0.0)
    X, Y = mesh(g)
    L = laplace_neumann(X ** 2 + Y ** 2, g)
    # stencil reaches two nodes per axis, so exactness holds two layers in
    assert np.allclose(L[2:-2, 2:-2], 4.0, rtol=0, atol=1e-12)


def test_laplace_is_divgrad_and_telescopes():
    g = Grid2D(12, 10, 0.1, 0.08)
    rng = np.random.default_rng(7)
    f = rng.standard_normal(g.shape)
    gx, gy = grad(f, g)
    assert np.array_equal(laplace_neumann(f, g), div(gx, gy, g))
    assert abs(np.sum(laplace_neumann(f, g)) * g.cell_area) <= 1e-12 * norm_l2(f, g)


@pytest.mark.parametrize("seed", range(5))
def test_summation_by_parts(seed):
    g = Grid2D(14, 11, 0.1, 0.09)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(g.shape)
    q = rng.standard_normal(g.shape)
    fx, fy = grad(f, g)
    qx, qy = grad(q, g)
    lhs = inner(div(fx, fy, g), q, g)
    rhs = -(inner(fx, qx, g) + inner(fy, qy, g))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(rhs), 1e-300)


def test_operator_linearity():
    g = Grid2D(10, 10)
    rng = np.random.default_rng(3)
    f, q = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    a, b = 2.5, -1.25
    for op in (lambda z: grad(z, g)[0], lambda z: laplace_neumann(z, g)):
        lhs = op(a * f + b * q)
        rhs = a * op(f) + b * op(q)
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, np.abs(rhs).max()))


def test_norms():
    g = Grid2D(10, 10, 0.1, 0.1)  # unit-area domain
    zero = np.zeros(g.shape)
    assert norm_l2(zero, g) == 0.0
    assert norm_linf(zero) == 0.0
    assert inner(zero, zero, g) == 0.0
    assert norm_l2(np.ones(g.shape), g) == pytest.approx(1.0)
    two = np.full(g.shape, 2.0)
    assert norm_l2(two, g) == pytest.approx(2.0)
    assert norm_linf(two) == 2.0


def test_norm_linf_zero_iff_zero_field():
    g = Grid2D(5, 5)
    f = np.zeros(g.shape)
    assert norm_linf(f) == 0.0
    f[2, 3] = 1e-300
    assert norm_linf(f) > 0.0


def test_inner_grid_mismatch():
    g = Grid2D(5, 5)
    with pytest.raises(ValueError):
        inner(np.zeros((5, 5)), np.zeros((4, 5)), g)
    with pytest.raises(ValueError):
        norm_l2(np.zeros((4, 4)), g)
