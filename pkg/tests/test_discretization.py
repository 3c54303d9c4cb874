import numpy as np
import pytest

from plapblow.asymptotics import exact_profile
from plapblow.discretization import (
    Field,
    GridError,
    Interval,
    Radial,
    build_grid,
    discrete_energy,
    flux,
    jacobian,
    p_lap_residual,
)


def _field(grid, fn):
    v = grid.vertices
    return Field(grid, fn(grid.nodes), (float(fn(v[0])), float(fn(v[-1]))))


def test_uniform_interval_nodes():
    g = build_grid(Interval(0.0, 1.0), 4, 1.0)
    np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75], rtol=1e-15)


def test_graded_interval_nodes():
    g = build_grid(Interval(0.0, 1.0, (True, False)), 4, 0.5)
    np.testing.assert_allclose(g.nodes, [1 / 15, 3 / 15, 7 / 15], rtol=1e-14)


def test_radial_nodes_and_distance():
    g = build_grid(Radial(2, 0.0, 1.0), 4, 1.0)
    np.testing.assert_allclose(g.nodes, [0.25, 0.5, 0.75])
    np.testing.assert_allclose(g.distance, [0.75, 0.5, 0.25])


def test_grid_rejects_bad_ratio():
    with pytest.raises(GridError):
        build_grid(Interval(0, 1), 8, 0.0)
    with pytest.raises(GridError):
        build_grid(Interval(0, 1), 8, 1.2)
    with pytest.raises(GridError):
        build_grid(Interval(0, 1), 3, 1.0)


def test_grid_is_bit_reproducible():
    a = build_grid(Interval(-1, 1), 300, 0.97)
    b = build_grid(Interval(-1, 1), 300, 0.97)
    assert a.vertices.tobytes() == b.vertices.tobytes()
    assert np.all(np.diff(a.nodes) > 0)


def test_symmetric_distance():
    g = build_grid(Interval(0.0, 2.0), 64, 0.9)
    np.testing.assert_allclose(g.distance, np.minimum(g.nodes, 2 - g.nodes))


def test_residual_quadratic_p2():
    g = build_grid(Interval(0, 1), 32, 1.0)
    r = p_lap_residual(_field(g, lambda x: x**2), 2.0, -2.0 * np.ones(g.n_nodes))
    assert np.max(np.abs(r)) < 1e-10


def test_residual_linear_p2_and_p3():
    g = build_grid(Interval(0, 1), 17, 0.9)
    for p in (2.0, 3.0):
        r = p_lap_residual(_field(g, lambda x: 1.0 + np.asarray(x)), p, np.zeros(g.n_nodes))
        assert np.max(np.abs(r)) < 1e-11


def test_residual_rejects_nonfinite():
    g = build_grid(Interval(0, 1), 8, 1.0)
    vals = np.ones(g.n_nodes)
    vals[3] = np.nan
    with pytest.raises(GridError):
        p_lap_residual(Field(g, vals, (1.0, 1.0)), 2.0, np.zeros(g.n_nodes))


@pytest.mark.parametrize("geometry", [Interval(0.3, 2.0), Radial(3, 0.0, 1.0), Radial(2, 0.5, 1.5)])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_telescoping(geometry, p):
    g = build_grid(geometry, 40, 0.93)
    rng = np.random.default_rng(1)
    fld = Field(g, 1 + rng.random(g.n_nodes), (1.2, 2.5))
    if g.symmetric_origin:
        fld = fld.with_boundary((None, 2.5))
    rhs = rng.standard_normal(g.n_nodes)
    r = p_lap_residual(fld, p, rhs)
    F = g.face_weight * flux(np.diff(fld.full()) / g.spacing, p)
    if g.symmetric_origin:
        F[0] = 0.0
    lhs = np.sum(r * g.volumes)
    rhs_total = -(F[-1] - F[0]) - np.sum(rhs * g.volumes)
    assert lhs == pytest.approx(rhs_total, rel=1e-12, abs=1e-12 * np.max(np.abs(F)))


def test_p2_residual_is_affine():
    g = build_grid(Interval(0, 1), 30, 0.95)
    rng = np.random.default_rng(2)
    u, v = rng.random(g.n_nodes), rng.random(g.n_nodes)
    zero = np.zeros(g.n_nodes)
    fu = Field(g, u, (1.0, 2.0))
    fv = Field(g, v, (0.5, -1.0))
    fuv = Field(g, u + v, (1.5, 1.0))
    lhs = p_lap_residual(fuv, 2.0, zero)
    rhs = p_lap_residual(fu, 2.0, zero) + p_lap_residual(fv, 2.0, zero)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.max(np.abs(lhs)))


def test_jacobian_p2_is_second_difference():
    g = build_grid(Interval(0, 1), 5, 1.0)
    J = jacobian(_field(g, lambda x: np.asarray(x) ** 3), 2.0, np.zeros(g.n_nodes))
    h2 = 0.2**2
    expected = (2 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)) / h2
    np.testing.assert_allclose(J.to_dense(), expected, rtol=1e-12)


def test_jacobian_rhs_derivative_on_diagonal():
    g = build_grid(Interval(0, 1), 9, 1.0)
    fld = _field(g, lambda x: 1 + np.asarray(x))
    d = np.arange(g.n_nodes, dtype=float)
    J0 = jacobian(fld, 2.5, np.zeros(g.n_nodes))
    J1 = jacobian(fld, 2.5, d)
    np.testing.assert_allclose(J0.diag - J1.diag, d)
    np.testing.assert_array_equal(J0.upper, J1.upper)
    np.testing.assert_array_equal(J0.lower, J1.lower)


@pytest.mark.parametrize("geometry", [Interval(0, 1), Radial(3, 0.0, 1.0)])
def test_jacobian_symmetric_after_scaling(geometry):
    g = build_grid(geometry, 30, 0.9)
    rng = np.random.default_rng(3)
    fld = Field(g, 1 + rng.random(g.n_nodes), (None if g.symmetric_origin else 1.0, 2.0))
    J = jacobian(fld, 1.5, rng.random(g.n_nodes)).row_scaled(g.volumes)
    np.testing.assert_allclose(J.upper, J.lower, rtol=1e-12)


def test_jacobian_matches_finite_difference_p15():
    g = build_grid(Interval(0, 1), 40, 0.95)
    rng = np.random.default_rng(4)
    u = 1 + rng.random(g.n_nodes)
    v = rng.standard_normal(g.n_nodes)
    fld = Field(g, u, (1.0, 2.0))
    rhs = np.zeros(g.n_nodes)
    step = 1e-6 * np.max(np.abs(u))
    fd = (p_lap_residual(fld.with_values(u + step * v), 1.5, rhs)
          - p_lap_residual(fld.with_values(u - step * v), 1.5, rhs)) / (2 * step)
    jv = jacobian(fld, 1.5, rhs, eps_reg=0.0).matvec(v)
    assert np.max(np.abs(jv - fd)) <= 1e-4 * np.max(np.abs(fd))


def test_energy_examples():
    g = build_grid(Interval(0, 1), 16, 1.0)
    const = Field(g, np.full(g.n_nodes, 3.0), (3.0, 3.0))
    assert discrete_energy(const, 2.0) == 0.0
    lin = _field(g, lambda x: np.asarray(x, dtype=float))
    assert discrete_energy(lin, 2.0) == pytest.approx(0.5, rel=1e-13)
    assert discrete_energy(lin, 3.0, lambda x, t: t) == pytest.approx(-1 / 6, rel=1e-13)


def test_refinement_order_uniform():
    # u = sqrt(2) d^-1 on (1, 2) solves -u'' = -u^3 with d = x
    errs = []
    for n in (32, 64, 128, 256):
        g = build_grid(Interval(1.0, 2.0, (False, False)), n, 1.0)
        fld = _field(g, lambda x: exact_profile(np.sqrt(2), 1.0, np.asarray(x)))
        rhs = -fld.values**3
        errs.append(np.max(np.abs(p_lap_residual(fld, 2.0, rhs))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_refinement_order_graded_p3():
    errs = []
    for n in (32, 64, 128, 256):
        g = build_grid(Interval(1.0, 2.0, (True, False)), n, 0.99 ** (64 / n))
        fld = _field(g, lambda x: exact_profile(2.0, 1.5, np.asarray(x)))
        c = 2 * 1.5**2 * 2.5 * 2.0**2  # -(|u'|u')' for u = 2 x^-1.5 equals c x^-6
        rhs = -c * g.nodes**-6.0
        errs.append(np.max(np.abs(p_lap_residual(fld, 3.0, rhs))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)
