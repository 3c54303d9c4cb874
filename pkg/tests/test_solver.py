import math

import numpy as np
import pytest

from plapblow.discretization import Field, Interval, Radial, build_grid, p_lap_residual
from plapblow.model import ABSORPTION, REACTION, NonlinearityModel, WeightModel
from plapblow.solver import (
    BlowUpError,
    DirichletProblem,
    SolveOptions,
    check_sub_super,
    monotonicity_gap,
    ordering_slack,
    ordering_test,
    roundoff_floor,
    solve_annulus_barrier,
    solve_dirichlet,
    solve_w0,
    truncated_rhs,
)

P = NonlinearityModel.power


def absorption_problem(n=128, ratio=1.0, L=10.0, q=3.0, p=2.0, geometry=Interval(0.0, 2.0), **kw):
    grid = build_grid(geometry, n, ratio)
    return DirichletProblem(grid=grid, p=p, lam=0.0, a=WeightModel(), b=WeightModel.constant(1.0),
                            f=P(ABSORPTION, q), g=None, boundary=(L, L), **kw)


def test_truncated_rhs_clamps():
    prob = absorption_problem()
    assert truncated_rhs(0.5, 0.1, 1.0, 2.0, prob) == -1.0
    assert truncated_rhs(0.5, 1.5, 1.0, 2.0, prob) == -(1.5**3)
    assert truncated_rhs(0.5, 9.0, 1.0, 2.0, prob) == -8.0
    assert truncated_rhs(0.5, 0.3, 1.2, 1.2, prob) == truncated_rhs(0.5, 7.0, 1.2, 1.2, prob)
    with pytest.raises(ValueError):
        truncated_rhs(0.5, 1.0, 2.0, 1.0, prob)


def test_truncated_rhs_with_reaction():
    grid = build_grid(Interval(0, 1), 8, 1.0)
    prob = DirichletProblem(grid=grid, p=2.0, lam=2.0, a=WeightModel.constant(1.5),
                            b=WeightModel.constant(1.0), f=P(ABSORPTION, 3), g=P(REACTION, 1),
                            boundary=(1.0, 1.0))
    assert truncated_rhs(0.3, 2.0, 0.5, 4.0, prob) == pytest.approx(2 * 1.5 * 2 - 8)


def test_harmonic_constant_in_one_step():
    grid = build_grid(Interval(0.0, 1.0), 64, 1.0)
    prob = DirichletProblem(grid=grid, p=2.0, lam=0.0, a=WeightModel(), b=WeightModel.constant(0.0),
                            f=P(ABSORPTION, 3), g=None, boundary=(5.0, 5.0))
    init = Field(grid, 5.0 + np.sin(3 * grid.nodes), prob.boundary)
    fld, rep = solve_dirichlet(prob, init)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(fld.values, 5.0, rtol=1e-12)


def test_cosh_solution():
    prob = absorption_problem(n=512, L=1.0, q=1.0, geometry=Interval(-1.0, 1.0))
    fld, rep = solve_dirichlet(prob)
    assert rep.converged
    mid = np.interp(0.0, prob.grid.nodes, fld.values)
    assert mid == pytest.approx(1 / math.cosh(1), abs=1e-4)


def test_converged_residual_within_weighted_tolerance():
    prob = absorption_problem(n=256, ratio=0.98)
    fld, rep = solve_dirichlet(prob)
    assert rep.converged
    F = p_lap_residual(fld, 2.0, prob.rhs(fld.values))
    noise = roundoff_floor(fld, 2.0, prob.rhs(fld.values))
    assert np.all(np.abs(F) <= np.maximum(rep.tol, noise))
    assert rep.tol == pytest.approx(1e-10 * rep.scale)
    assert rep.scale == pytest.approx(1000.0)


def test_energy_decreases_along_accepted_steps():
    prob = absorption_problem(n=256, ratio=0.98)
    _, rep = solve_dirichlet(prob)
    trace = np.array(rep.energy_trace)
    assert rep.energy_fallbacks == 0
    assert np.all(np.diff(trace) <= 1e-12 * max(1.0, np.max(np.abs(trace))))


def test_cubic_against_refined_reference():
    coarse = absorption_problem(n=128)
    fine = absorption_problem(n=512)
    uc, rc = solve_dirichlet(coarse)
    uf, rf = solve_dirichlet(fine)
    assert rc.converged and rf.converged
    x = np.linspace(0.5, 1.5, 11)
    ref = np.interp(x, fine.grid.nodes, uf.values)
    got = np.interp(x, coarse.grid.nodes, uc.values)
    assert np.max(np.abs(got / ref - 1)) <= 1e-3


def test_self_convergence():
    vals = []
    for n in (32, 64, 128, 256):
        prob = absorption_problem(n=n, L=1.0, q=1.0, geometry=Interval(-1.0, 1.0))
        fld, rep = solve_dirichlet(prob)
        assert rep.converged
        vals.append(np.interp([-0.5, 0.0, 0.5], prob.grid.nodes, fld.values))
    diffs = [np.max(np.abs(vals[i + 1] - vals[i])) for i in range(3)]
    assert diffs[0] / diffs[1] >= 1.5 and diffs[1] / diffs[2] >= 1.5


def test_deterministic_report():
    prob = absorption_problem(n=200, ratio=0.97)
    f1, r1 = solve_dirichlet(prob)
    f2, r2 = solve_dirichlet(prob)
    assert r1.to_dict() == r2.to_dict()
    assert f1.values.tobytes() == f2.values.tobytes()


def test_bracket_preserved():
    # 1 is a subsolution (the solution exceeds it) and the boundary value 10 a supersolution
    prob = absorption_problem(n=128, sub=1.0, sup=10.0)
    init = Field(prob.grid, np.full(prob.grid.n_nodes, 5.0), prob.boundary)
    fld, rep = solve_dirichlet(prob, init)
    assert rep.converged
    assert np.all(fld.values >= 1.0) and np.all(fld.values <= 10.0)
    free, _ = solve_dirichlet(absorption_problem(n=128))
    np.testing.assert_allclose(fld.values, free.values, rtol=1e-8)


def test_residual_merit_also_converges():
    prob = absorption_problem(n=128)
    _, rep = solve_dirichlet(prob, opts=SolveOptions(merit="residual"))
    assert rep.converged and rep.energy_trace == [0.0] * len(rep.energy_trace)


def test_max_iter_gives_report_not_exception():
    prob = absorption_problem(n=128)
    _, rep = solve_dirichlet(prob, opts=SolveOptions(max_iter=1))
    assert not rep.converged and rep.iterations == 1


def test_nan_nonlinearity_raises():
    grid = build_grid(Interval(0, 1), 16, 1.0)
    bad = NonlinearityModel.from_callable(ABSORPTION, lambda t: np.full_like(np.asarray(t, float), np.nan))
    prob = DirichletProblem(grid=grid, p=2.0, lam=0.0, a=WeightModel(), b=WeightModel.constant(1.0),
                            f=bad, g=None, boundary=(1.0, 1.0))
    with pytest.raises(BlowUpError):
        solve_dirichlet(prob)


def test_w0_interval():
    w0, fld = solve_w0(2.0, Interval(-1.0, 1.0), n_cells=512)
    assert w0 == pytest.approx(1 / math.cosh(1), abs=1e-4)
    assert np.all(fld.values <= 1.0)


def test_w0_ball():
    w0, _ = solve_w0(2.0, Radial(3, 0.0, 1.0), n_cells=512)
    assert w0 == pytest.approx(1 / math.sinh(1), abs=1e-3)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_w0_tiny_domain(p):
    w0, _ = solve_w0(p, Interval(0.0, 1e-3), n_cells=64)
    assert 0.999 < w0 <= 1.0


def test_constant_is_super_under_absorption():
    prob = absorption_problem(n=64)
    cand = Field(prob.grid, np.full(prob.grid.n_nodes, 10.0), (10.0, 10.0))
    assert check_sub_super(cand, prob, "super")[0]
    assert not check_sub_super(cand, prob, "sub")[0]


def test_constant_is_sub_under_dominant_reaction():
    grid = build_grid(Interval(0, 2), 64, 1.0)
    prob = DirichletProblem(grid=grid, p=2.0, lam=10.0, a=WeightModel.constant(1.0),
                            b=WeightModel.constant(1.0), f=P(ABSORPTION, 3), g=P(REACTION, 1),
                            boundary=(4.0, 4.0))
    cand = Field(grid, np.full(grid.n_nodes, 2.0), (2.0, 2.0))
    ok, worst = check_sub_super(cand, prob, "sub")
    assert ok and worst <= 0


def test_solution_is_sub_and_super():
    prob = absorption_problem(n=128)
    fld, _ = solve_dirichlet(prob)
    assert check_sub_super(fld, prob, "sub")[0]
    assert check_sub_super(fld, prob, "super")[0]


def test_boundary_ordering_counts():
    prob = absorption_problem(n=64)
    fld, _ = solve_dirichlet(prob)
    raised = fld.with_boundary((11.0, 10.0))
    ok, worst = check_sub_super(raised, prob, "sub")
    assert not ok and worst >= 1.0


def test_bad_role():
    prob = absorption_problem(n=16)
    with pytest.raises(ValueError):
        check_sub_super(Field(prob.grid, np.ones(prob.grid.n_nodes), (1.0, 1.0)), prob, "both")


def test_ordering_examples():
    prob = absorption_problem(n=128, L=5.0)
    u1, _ = solve_dirichlet(prob)
    u2, _ = solve_dirichlet(prob.with_boundary((10.0, 10.0)), u1.with_boundary((10.0, 10.0)))
    assert ordering_test(u2, u1, prob)
    assert ordering_slack(u2, u1) > 0
    assert ordering_test(u1, u1)
    scaled = u1.with_values(0.9 * u1.values).with_boundary((4.5, 4.5))
    assert check_sub_super(scaled, prob, "sub")[0]
    assert ordering_test(u1, scaled)
    assert not ordering_test(scaled, u1)


def test_monotonicity_gap_examples():
    assert monotonicity_gap([1.0, 2.0], [1.0, 2.0], 1.5) == 0.0
    assert monotonicity_gap([3.0], [1.0], 3.0) == pytest.approx((9 - 1) * 2)
    assert monotonicity_gap([0.0], [1.0], 1.5) > 0


def test_annulus_barrier_positive_and_ordered():
    z2, fld = solve_annulus_barrier(2.0, 2, 3.0, 1.0, 5.0)
    assert 0 < z2 < 5.0
    assert np.all(np.diff(fld.full()) <= 1e-12)
