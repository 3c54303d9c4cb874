"""Damped Newton solver for the truncated Dirichlet problem.

The problem is ``-Delta_p u = lam a(x) g(u) - b(x) f(u)`` with finite
boundary data.  When a sub/super bracket is supplied, the right-hand side
is frozen outside it (the clipped nonlinearity ``h(x, t)``) and iterates
are projected into the bracket.  Step acceptance requires a strict decrease
of the residual max-norm and, in energy mode, no increase of the discrete
energy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .discretization import (
    Field,
    Grid1D,
    Interval,
    Radial,
    build_grid,
    discrete_energy,
    flux,
    jacobian,
    p_lap_residual,
)
from .model import ABSORPTION, NonlinearityModel, WeightModel

__all__ = [
    "BlowUpError",
    "DirichletProblem",
    "SolveOptions",
    "SolveReport",
    "truncated_rhs",
    "solve_dirichlet",
    "solve_w0",
    "check_sub_super",
    "ordering_test",
    "monotonicity_gap",
    "solve_annulus_barrier",
]

log = logging.getLogger(__name__)


class BlowUpError(ArithmeticError):
    """The Newton iterate became nonfinite."""


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    grid: Grid1D
    p: float
    lam: float
    a: WeightModel
    b: WeightModel
    f: NonlinearityModel
    g: NonlinearityModel | None
    boundary: tuple[float | None, float | None]
    positivity_floor: float = 1e-12
    sub: np.ndarray | float | None = None
    sup: np.ndarray | float | None = None

    def __post_init__(self):
        lo, hi = self.boundary
        if lo is None and not self.grid.symmetric_origin:
            raise ValueError("only the origin of a ball may omit boundary data")
        if self.positivity_floor < 0:
            raise ValueError("positivity_floor must be nonnegative")
        d = self.grid.distance
        object.__setattr__(self, "_a_vals", np.asarray(self.a(d), dtype=float)
                           if self.lam != 0 else np.zeros_like(d))
        object.__setattr__(self, "_b_vals", np.asarray(self.b(d), dtype=float))

    @property
    def a_values(self) -> np.ndarray:
        return self._a_vals

    @property
    def b_values(self) -> np.ndarray:
        return self._b_vals

    @property
    def has_reaction(self) -> bool:
        return self.g is not None and self.lam != 0 and bool(np.any(self._a_vals != 0))

    def lower_bound(self) -> np.ndarray:
        lo = np.full(self.grid.n_nodes, self.positivity_floor)
        if self.sub is not None:
            lo = np.maximum(lo, self.sub)
        return lo

    def upper_bound(self) -> np.ndarray:
        if self.sup is None:
            return np.full(self.grid.n_nodes, np.inf)
        return np.broadcast_to(np.asarray(self.sup, dtype=float), (self.grid.n_nodes,)).copy()

    def with_boundary(self, boundary, **changes) -> DirichletProblem:
        return replace(self, boundary=tuple(boundary), **changes)

    def boundary_max(self) -> float:
        return max(v for v in self.boundary if v is not None)

    def rhs(self, u, truncate: bool = True) -> np.ndarray:
        tau = self._clip(u) if truncate else np.asarray(u, dtype=float)
        return self._source(tau, self._a_vals, self._b_vals)

    def rhs_derivative(self, u, truncate: bool = True) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        tau = self._clip(u) if truncate else u
        out = -self._b_vals * _safe(self.f.derivative, tau)
        if self.has_reaction:
            out = out + self.lam * self._a_vals * _safe(self.g.derivative, tau)
        if truncate:
            frozen = (u < self.lower_clip()) | (u > self.upper_bound())
            out = np.where(frozen, 0.0, out)
        return out

    def lower_clip(self) -> np.ndarray:
        if self.sub is None:
            return np.full(self.grid.n_nodes, -np.inf)
        return np.broadcast_to(np.asarray(self.sub, dtype=float), (self.grid.n_nodes,))

    def _clip(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.sub is not None:
            u = np.maximum(u, self.sub)
        if self.sup is not None:
            u = np.minimum(u, self.sup)
        return u

    def _source(self, tau, a_vals, b_vals):
        out = -b_vals * _safe(self.f, tau)
        if self.has_reaction:
            out = out + self.lam * a_vals * _safe(self.g, tau)
        return out


def _safe(fn, t):
    """Evaluate a nonlinearity (or its derivative) with ``0`` wherever ``t <= 0``."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    if np.all(pos):
        return np.asarray(fn(t), dtype=float)
    out = np.zeros_like(t)
    if np.any(pos):
        out[pos] = fn(t[pos])
    return out


def truncated_rhs(x_distance, t, sub_value, super_value, problem: DirichletProblem):
    """``lam a(x) g(tau) - b(x) f(tau)`` with ``tau = clamp(t, sub_value, super_value)``."""
    if np.any(np.asarray(sub_value) > np.asarray(super_value)):
        raise ValueError("sub_value must not exceed super_value")
    d = np.asarray(x_distance, dtype=float)
    tau = np.clip(np.asarray(t, dtype=float), sub_value, super_value)
    a_vals = problem.a(d) if problem.lam != 0 else np.zeros_like(d)
    out = -np.asarray(problem.b(d)) * _safe(problem.f, tau)
    if problem.g is not None and problem.lam != 0 and np.any(np.asarray(a_vals) != 0):
        out = out + problem.lam * np.asarray(a_vals) * _safe(problem.g, tau)
    return float(out) if np.ndim(out) == 0 else out


JACOBIAN_BOOSTS = (1.0, 1e4, 1e7, 1e9)


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    merit: str = "energy"  # or "residual"
    eps_reg: float = 1e-10
    max_backtracks: int = 60


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_norms: list[float] = field(default_factory=list)
    damping_factors: list[float] = field(default_factory=list)
    energy_trace: list[float] = field(default_factory=list)
    floor_activations: int = 0
    energy_fallbacks: int = 0
    tol: float = 0.0
    scale: float = 1.0
    noise_floor: float = 0.0
    merit_norms: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.residual_norms[-1] if self.residual_norms else None,
            "tol": self.tol,
            "scale": self.scale,
            "noise_floor": self.noise_floor,
            "residual_norms": list(self.residual_norms),
            "merit_norms": list(self.merit_norms),
            "damping_factors": list(self.damping_factors),
            "energy_trace": list(self.energy_trace),
            "floor_activations": self.floor_activations,
            "energy_fallbacks": self.energy_fallbacks,
        }


def _gradient_energy(fld: Field, p: float) -> float:
    return discrete_energy(fld, p)


def _potential_increment(problem: DirichletProblem, u0, u1) -> float:
    """``sum_i V_i int_{u0_i}^{u1_i} h(x_i, t) dt`` by adaptive vector quadrature."""
    du = u1 - u0
    if not np.any(du):
        return 0.0

    def integrand(s):
        return problem.rhs(u0 + s * du) * du

    vals, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-10, norm="max")
    return float(np.sum(problem.grid.volumes * vals))


def roundoff_floor(fld: Field, p: float, rhs) -> np.ndarray:
    """Per-node residual noise that floating-point evaluation alone produces.

    Each face flux carries a relative error of about ``eps * (p-1) * cond(Du)``
    with ``cond(Du) = (|u_l| + |u_r|) / |u_r - u_l|``; the divergence divides by
    the dual-cell measure.  For ``p < 2`` near critical points this floor can
    exceed a fixed tolerance.
    """
    grid = fld.grid
    full = fld.full()
    du = np.abs(np.diff(full))
    mag = np.abs(full[:-1]) + np.abs(full[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(du > 0, mag / du, 0.0)
    F = np.abs(grid.face_weight * flux(np.diff(full) / grid.spacing, p))
    if grid.symmetric_origin:
        F[0] = 0.0
    err = 4 * np.finfo(float).eps * (1.0 + abs(p - 1.0) * cond) * F
    return (err[1:] + err[:-1]) / grid.volumes + 4 * np.finfo(float).eps * np.abs(rhs)


def solve_dirichlet(problem: DirichletProblem, init: Field | None = None,
                    opts: SolveOptions = SolveOptions()) -> tuple[Field, SolveReport]:
    """Damped Newton for the (optionally truncated) Dirichlet problem.

    Never raises on non-convergence; the report carries ``converged=False``.
    A nonfinite residual at an accepted iterate raises :class:`BlowUpError`.
    """
    grid, p = problem.grid, problem.p
    if init is None:
        init = Field(grid, np.full(grid.n_nodes, problem.boundary_max()), problem.boundary)
    init = init.with_boundary(problem.boundary)
    lower, upper = problem.lower_bound(), problem.upper_bound()
    u = np.clip(init.values, lower, upper)

    scale = max(1.0, float(np.max(np.abs(problem.rhs(init.values)))))
    tol = opts.tol * scale
    lo, hi = grid.geometry.bounds
    eps_reg = opts.eps_reg * max(1.0, problem.boundary_max() / (hi - lo))

    def residual(vals):
        fld = Field(grid, vals, problem.boundary)
        return p_lap_residual(fld, p, problem.rhs(vals), eps_reg)

    F = residual(u)
    if not np.all(np.isfinite(F)):
        raise BlowUpError("blow-up of iterate")
    norm = float(np.max(np.abs(F)))
    report = SolveReport(converged=False, iterations=0, residual_norms=[norm],
                         energy_trace=[0.0], tol=tol, scale=scale)
    use_energy = opts.merit == "energy"
    energy = 0.0
    grad_energy = _gradient_energy(Field(grid, u, problem.boundary), p) if use_energy else 0.0

    def weights(vals):
        noise = roundoff_floor(Field(grid, vals, problem.boundary), p, problem.rhs(vals))
        report.noise_floor = float(np.max(noise))
        return np.maximum(tol, noise)

    w = weights(u)
    merit = float(np.max(np.abs(F) / w))
    report.merit_norms.append(merit)

    def line_search(delta, require_energy):
        t = 1.0
        for _ in range(opts.max_backtracks):
            trial = np.clip(u + t * delta, lower, upper)
            F_trial = residual(trial)
            if np.all(np.isfinite(F_trial)):
                m_trial = float(np.max(np.abs(F_trial) / w))
                if m_trial < merit:
                    if not use_energy:
                        return trial, F_trial, m_trial, t, None, 0.0
                    g_trial = _gradient_energy(Field(grid, trial, problem.boundary), p)
                    d_energy = (g_trial - grad_energy) - _potential_increment(problem, u, trial)
                    slack = 1e-12 * max(1.0, abs(grad_energy))
                    if not require_energy or d_energy <= slack:
                        return trial, F_trial, m_trial, t, d_energy, g_trial
            t *= 0.5
        return None

    for it in range(opts.max_iter):
        if merit <= 1.0:
            report.converged = True
            break
        accepted = None
        # the exact Jacobian first; a stalled search retries with a heavier
        # regularisation, which tames the overshoot of |D|^(p-2) D near D = 0
        for boost in JACOBIAN_BOOSTS:
            J = jacobian(Field(grid, u, problem.boundary), p, problem.rhs_derivative(u),
                         eps_reg * boost)
            delta = J.solve(-F)
            if not np.all(np.isfinite(delta)):
                raise BlowUpError("blow-up of iterate")
            for require_energy in ((True, False) if use_energy else (False,)):
                accepted = line_search(delta, require_energy)
                if accepted is not None:
                    if use_energy and not require_energy:
                        report.energy_fallbacks += 1
                    break
            if accepted is not None:
                break
        if accepted is None:
            log.debug("line search stalled at merit %.3e", merit)
            break
        u, F, merit, t, d_energy, grad_energy = accepted
        # the noise weights follow the iterate; the merit is restated under them
        w = weights(u)
        merit = float(np.max(np.abs(F) / w))
        report.iterations = it + 1
        report.residual_norms.append(float(np.max(np.abs(F))))
        report.merit_norms.append(merit)
        report.damping_factors.append(t)
        if d_energy is not None:
            energy += d_energy
        report.energy_trace.append(energy)
        report.floor_activations += int(np.count_nonzero(u <= problem.positivity_floor))
    report.converged = merit <= 1.0
    return Field(grid, u, problem.boundary), report


def solve_w0(p: float, geometry: Interval | Radial, n_cells: int = 512,
             grading_ratio: float = 1.0, opts: SolveOptions = SolveOptions()):
    """Solve ``Delta_p w = w^(p-1)``, ``w = 1`` on the boundary; return ``(min w, field)``."""
    grid = build_grid(geometry, n_cells, grading_ratio)
    if isinstance(geometry, Radial) and geometry.symmetric_origin:
        boundary = (None, 1.0)
    else:
        boundary = (1.0, 1.0)
    problem = DirichletProblem(
        grid=grid, p=p, lam=0.0, a=WeightModel(), b=WeightModel.constant(1.0),
        f=NonlinearityModel.power(ABSORPTION, p - 1.0), g=None, boundary=boundary,
        positivity_floor=1e-300)
    # a bowl-shaped start keeps face gradients away from zero for p < 2
    lo, hi = geometry.bounds
    centre = 0.0 if isinstance(geometry, Radial) else 0.5 * (lo + hi)
    s = (grid.nodes - centre) / (hi - centre)
    init = Field(grid, 0.5 + 0.5 * s * s, boundary)
    fld, report = solve_dirichlet(problem, init, opts)
    if not report.converged:
        raise RuntimeError(f"torsion-like problem did not converge: residual {report.residual_norms[-1]:.3e}")
    return float(np.min(fld.values)), fld


def _sign_scale(problem: DirichletProblem, values) -> float:
    return max(1.0, float(np.max(np.abs(problem.rhs(values, truncate=False)))))


def check_sub_super(candidate: Field, problem: DirichletProblem, role: str,
                    tol_sign: float = 1e-8) -> tuple[bool, float]:
    """Check the differential inequality and boundary ordering of ``candidate``.

    ``role="sub"``: ``-Delta_p u <= rhs`` and boundary ``<= L``;
    ``role="super"``: the reverse.  Returns ``(ok, worst_violation)`` with the
    violation measured in residual units (positive means violated).
    """
    if role not in ("sub", "super"):
        raise ValueError("role must be 'sub' or 'super'")
    vals = candidate.values
    res = p_lap_residual(candidate, problem.p, problem.rhs(vals, truncate=False))
    tol = tol_sign * _sign_scale(problem, vals)
    sign = 1.0 if role == "sub" else -1.0
    worst = float(np.max(sign * res))
    for mine, target in zip(candidate.boundary, problem.boundary):
        if mine is not None and target is not None:
            worst = max(worst, sign * (mine - target))
    ok = worst <= tol
    return bool(ok), worst


def ordering_test(u1: Field, u2: Field, problem: DirichletProblem | None = None,
                  tol_order: float = 1e-6) -> bool:
    """True when ``u1 >= u2 - tol`` at every node, ``tol = tol_order * max(1, |u|)``."""
    scale = max(1.0, float(np.max(np.abs(u1.values))), float(np.max(np.abs(u2.values))))
    return bool(np.all(u1.values >= u2.values - tol_order * scale))


def ordering_slack(u1: Field, u2: Field) -> float:
    """``min(u1 - u2)`` over the nodes."""
    return float(np.min(u1.values - u2.values))


def monotonicity_gap(a, b, p: float) -> float:
    """``<|a|^(p-2) a - |b|^(p-2) b, a - b>`` for vectors ``a``, ``b``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    va = na ** (p - 2.0) * a if na > 0 else np.zeros_like(a)
    vb = nb ** (p - 2.0) * b if nb > 0 else np.zeros_like(b)
    return float(np.dot(va - vb, a - b))


def solve_annulus_barrier(p: float, N: int, q: float, C3: float, K: float,
                          n_cells: int = 400, opts: SolveOptions = SolveOptions()):
    """Radial barrier on the annulus ``1 < r < 3``.

    Solves ``-(r^(N-1)|Z'|^(p-2)Z')' = -C3 r^(N-1) Z^q``, ``Z(1) = K``,
    ``Z(3) = 0`` and returns ``(Z(2), field)``; ``Z(2)`` is the constant in the
    lower bound ``u >= Z(2) d^(-alpha)`` near the boundary.
    """
    grid = build_grid(Radial(N, 1.0, 3.0), n_cells, 1.0)
    problem = DirichletProblem(
        grid=grid, p=p, lam=0.0, a=WeightModel(), b=WeightModel.constant(C3),
        f=NonlinearityModel.power(ABSORPTION, q), g=None, boundary=(K, 0.0),
        positivity_floor=0.0)
    init = Field(grid, K * (3.0 - grid.nodes) / 2.0, problem.boundary)
    fld, report = solve_dirichlet(problem, init, opts)
    if not report.converged:
        raise RuntimeError("annulus barrier did not converge")
    z2 = float(np.interp(2.0, grid.vertices, fld.full()))
    return z2, fld
