"""Ladder of truncated problems with growing boundary data, and the rate fit.

Rung ``n`` solves the Dirichlet problem with boundary value
``L_n = L0 * growth**n`` on every blow-up endpoint, warm-started from rung
``n - 1``.  The rungs must increase monotonically; their interior values
saturate, and the near-boundary part of the last rung carries the rate
``u ~ A d^-alpha``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import RatePoint, alpha_of
from .discretization import Field
from .solver import (
    DirichletProblem,
    SolveOptions,
    SolveReport,
    ordering_slack,
    solve_dirichlet,
)

__all__ = [
    "LadderConfig",
    "Rung",
    "LadderReport",
    "RateFit",
    "FitError",
    "MonotonicityError",
    "LambdaGateError",
    "run_ladder",
    "fit_rate",
    "compare_rate",
    "default_L0",
    "profile_guess",
]

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


class MonotonicityError(RuntimeError):
    """Two consecutive rungs are out of order beyond tolerance."""


class LambdaGateError(ValueError):
    """``lam`` is not below the sub-solution threshold."""


@dataclass(frozen=True)
class LadderConfig:
    L0: float | None = None
    growth: float = 2.0
    max_rungs: int = 12
    interior_margin: float = 0.5
    interior_tol: float = 1e-6
    tol_order: float = 1e-6

    def __post_init__(self):
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")
        if self.max_rungs < 1:
            raise ValueError("max_rungs must be at least 1")
        if not self.interior_margin > 0:
            raise ValueError("interior_margin must be positive")
        if not self.interior_tol > 0:
            raise ValueError("interior_tol must be positive")
        if self.L0 is not None and not self.L0 > 0:
            raise ValueError("L0 must be positive")


@dataclass(frozen=True)
class RateFit:
    alpha_hat: float
    A_hat: float
    window: tuple[float, float]
    rms_log_residual: float
    n_points: int
    alpha_constrained: float
    A_hat_constrained: float

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "A_hat": self.A_hat,
            "window": list(self.window),
            "rms_log_residual": self.rms_log_residual,
            "n_points": self.n_points,
            "alpha_constrained": self.alpha_constrained,
            "A_hat_constrained": self.A_hat_constrained,
        }


@dataclass
class Rung:
    L: float
    report: SolveReport
    sup_delta: float
    ordering_slack: float

    def to_dict(self) -> dict:
        return {"L": self.L, "sup_delta": self.sup_delta,
                "ordering_slack": self.ordering_slack, "solve": self.report.to_dict()}


@dataclass
class LadderReport:
    rungs: list[Rung] = field(default_factory=list)
    converged: bool = False
    final_field: Field | None = None
    rate_fit: RateFit | None = None
    failed_rung: int | None = None
    fields: list[Field] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "failed_rung": self.failed_rung,
            "n_rungs": len(self.rungs),
            "rungs": [r.to_dict() for r in self.rungs],
            "rate_fit": self.rate_fit.to_dict() if self.rate_fit else None,
        }


def default_L0(A: float, alpha: float, interior_margin: float) -> float:
    """Four times the analytic profile at the edge of the compact set."""
    return 4.0 * A * interior_margin ** (-alpha)


def profile_guess(template: DirichletProblem, A: float, alpha: float, L: float) -> Field:
    """``A (d + d0)^-alpha`` with ``d0`` chosen so the value at ``d = 0`` is ``L``.

    Unlike a clipped profile it has no flat stretch, which matters for
    ``p > 2`` where a vanishing gradient makes the flux degenerate.
    """
    d = template.grid.distance
    d0 = (A / L) ** (1.0 / alpha)
    vals = A * (d + d0) ** (-alpha)
    return Field(template.grid, vals, _rung_boundary(template, L))


def _rung_boundary(template: DirichletProblem, L: float):
    blow = template.grid.geometry.blowup
    return tuple(None if old is None else (L if flag else old)
                 for old, flag in zip(template.boundary, blow))


def _compact_mask(fld: Field, margin: float) -> np.ndarray:
    mask = fld.grid.distance >= margin
    if not np.any(mask):
        raise ValueError("interior_margin leaves no nodes in the compact set")
    return mask


def run_ladder(template: DirichletProblem, config: LadderConfig,
               opts: SolveOptions = SolveOptions(), *, L0: float | None = None,
               lambda_star: float | None = None, keep_fields: bool = False,
               init: Field | None = None) -> LadderReport:
    """Solve the rungs ``L_n = L0 growth^n``, ``n < max_rungs``, with warm starts.

    ``converged`` is set once the sup-change on the compact set stays below
    ``interior_tol * max(1, max_K u)`` for two consecutive rungs; the ladder
    still runs to ``max_rungs`` unless a rung fails.

    ``template`` fixes the grid, coefficients and any non-blow-up boundary
    value; its blow-up boundary entries are replaced rung by rung.  When
    ``lambda_star`` is finite, ``template.lam`` must lie below it.  ``init``
    seeds the first rung (see :func:`profile_guess`); otherwise the constant
    ``L0`` field is used.
    """
    if lambda_star is not None and math.isfinite(lambda_star) and not template.lam < lambda_star:
        raise LambdaGateError(
            f"lambda={template.lam:g} is not below the existence threshold lambda*={lambda_star:g}")
    L0 = config.L0 if config.L0 is not None else L0
    if L0 is None:
        raise ValueError("L0 is required (config.L0 or the L0 argument)")
    K = None
    report = LadderReport()
    prev: Field | None = None
    below_tol = 0
    for n in range(config.max_rungs):
        L = L0 * config.growth**n
        boundary = _rung_boundary(template, L)
        probe = template.with_boundary(boundary, positivity_floor=min(
            template.positivity_floor, 1e-8 * L) if template.positivity_floor > 0 else 0.0)
        # a constant L is a supersolution when the source is nonpositive there
        const_rhs = probe.rhs(np.full(probe.grid.n_nodes, L), truncate=False)
        problem = probe.with_boundary(boundary, sup=L if np.all(const_rhs <= 0) else None)
        if prev is not None:
            start = prev.with_boundary(boundary)
        elif init is not None:
            start = init.with_values(np.clip(init.values, problem.lower_bound(),
                                             problem.upper_bound())).with_boundary(boundary)
        else:
            start = None
        try:
            fld, rep = solve_dirichlet(problem, start, opts)
        except ArithmeticError as exc:
            log.warning("rung %d (L=%g) failed: %s", n, L, exc)
            report.failed_rung = n
            break
        if K is None:
            K = _compact_mask(fld, config.interior_margin)
        if prev is None:
            delta, slack = math.inf, math.inf
        else:
            delta = float(np.max(np.abs(fld.values[K] - prev.values[K])))
            slack = ordering_slack(fld, prev)
            scale = max(1.0, float(np.max(np.abs(fld.values))))
            if slack < -config.tol_order * scale:
                raise MonotonicityError(
                    f"rung {n} falls below rung {n - 1} by {-slack:.3e}; the comparison principle is violated")
        report.rungs.append(Rung(L, rep, delta, slack))
        if keep_fields:
            report.fields.append(fld)
        report.final_field = fld
        if not rep.converged:
            log.warning("rung %d (L=%g) did not converge", n, L)
            report.failed_rung = n
            break
        prev = fld
        k_scale = max(1.0, float(np.max(np.abs(fld.values[K]))))
        below_tol = below_tol + 1 if delta < config.interior_tol * k_scale else 0
        log.info("rung %d L=%.6g sup_delta=%.3e slack=%.3e its=%d", n, L, delta, slack, rep.iterations)
        # keep climbing after saturation: later rungs only sharpen the rate fit
        if below_tol >= 2:
            report.converged = True
    return report


def fit_rate(fld: Field, gamma_at_boundary: float, p: float, q: float, *,
             interior_margin: float = 0.5, cap_fraction: float = 0.1,
             asymptotic_factor: float = 10.0, skip_nodes: int = 2,
             d_max: float | None = None) -> RateFit:
    """Least-squares fit of ``log u = log A - alpha log d`` over the admissible window.

    The window drops the ``skip_nodes`` nodes nearest each blow-up endpoint,
    keeps ``u <= cap_fraction * L`` (finite-L saturation) and
    ``u >= asymptotic_factor * median(u on {d >= interior_margin})``.
    ``d_max`` optionally shrinks the window further.
    """
    grid = fld.grid
    d = grid.distance
    u = fld.values
    L = max((v for v in fld.boundary if v is not None), default=math.inf)
    keep = np.ones(len(u), dtype=bool)
    blow = grid.geometry.blowup
    if blow[0]:
        keep[:skip_nodes] = False
    if blow[1]:
        keep[len(u) - skip_nodes:] = False
    interior = d >= interior_margin
    if np.any(interior):
        keep &= u >= asymptotic_factor * float(np.median(u[interior]))
    keep &= u <= cap_fraction * L
    keep &= d > 0
    if d_max is not None:
        keep &= d <= d_max
    n = int(np.count_nonzero(keep))
    if n < 4:
        raise FitError(f"only {n} admissible points in the fit window; refine grid or raise L")
    x = np.log(d[keep])
    y = np.log(u[keep])
    design = np.column_stack([np.ones_like(x), -x])
    (logA, alpha_hat), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([logA, alpha_hat])
    try:
        alpha_c = alpha_of(p, q, gamma_at_boundary)
        A_c = math.exp(float(np.mean(y + alpha_c * x)))
    except ValueError:
        alpha_c, A_c = math.nan, math.nan
    return RateFit(
        alpha_hat=float(alpha_hat),
        A_hat=math.exp(float(logA)),
        window=(float(np.min(d[keep])), float(np.max(d[keep]))),
        rms_log_residual=float(np.sqrt(np.mean(resid**2))),
        n_points=n,
        alpha_constrained=float(alpha_c),
        A_hat_constrained=float(A_c),
    )


def compare_rate(fit: RateFit, analytic: RatePoint) -> tuple[float, float]:
    """Relative errors ``(|alpha_hat - alpha| / alpha, |A_hat - A| / A)``."""
    return (abs(fit.alpha_hat - analytic.alpha) / analytic.alpha,
            abs(fit.A_hat - analytic.A) / analytic.A)
