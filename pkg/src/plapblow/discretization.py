"""Graded 1D/radial grids and the flux-form discrete p-Laplacian.

Unknowns live at interior vertices.  Around vertex ``i`` the dual cell runs
between the neighbouring midpoints; the flux through a face at radius ``r``
is ``r**(N-1) * |Du|**(p-2) * Du`` with ``Du`` the divided difference across
the face.  Interval geometries use ``N = 1``.  For a ball (``r_lo = 0``) the
first dual cell extends to the origin, where the flux vanishes by symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "Interval",
    "Radial",
    "Grid1D",
    "Field",
    "GridError",
    "Tridiagonal",
    "build_grid",
    "DEFAULT_GRADING",
    "flux",
    "p_lap_residual",
    "jacobian",
    "discrete_energy",
]

DEFAULT_GRADING = 0.99


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    x_lo: float
    x_hi: float
    blowup: tuple[bool, bool] = (True, True)

    @property
    def dim(self) -> int:
        return 1

    @property
    def bounds(self) -> tuple[float, float]:
        return self.x_lo, self.x_hi


@dataclass(frozen=True)
class Radial:
    """Ball (``r_lo = 0``) or annulus in ``R^N``, blowing up at ``r_hi``."""

    N: int
    r_lo: float
    r_hi: float

    @property
    def dim(self) -> int:
        return self.N

    @property
    def bounds(self) -> tuple[float, float]:
        return self.r_lo, self.r_hi

    @property
    def blowup(self) -> tuple[bool, bool]:
        return (False, True)

    @property
    def symmetric_origin(self) -> bool:
        return self.r_lo == 0


@dataclass(frozen=True, eq=False)
class Grid1D:
    geometry: Interval | Radial
    n_cells: int
    grading_ratio: float
    vertices: np.ndarray  # includes both endpoints

    @property
    def nodes(self) -> np.ndarray:
        return self.vertices[1:-1]

    @property
    def n_nodes(self) -> int:
        return self.n_cells - 1

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def symmetric_origin(self) -> bool:
        return isinstance(self.geometry, Radial) and self.geometry.symmetric_origin

    @property
    def distance(self) -> np.ndarray:
        return self.distance_at(self.nodes)

    def distance_at(self, x) -> np.ndarray:
        lo, hi = self.geometry.bounds
        x = np.asarray(x, dtype=float)
        if isinstance(self.geometry, Radial):
            return hi - x
        ends = [abs(x - e) for e, flag in zip((lo, hi), self.geometry.blowup) if flag]
        if not ends:
            return np.minimum(x - lo, hi - x)
        return np.minimum.reduce(ends) if len(ends) > 1 else ends[0]

    @property
    def spacing(self) -> np.ndarray:
        """Cell widths ``h_{i+1/2}``, one per face."""
        return np.diff(self.vertices)

    @property
    def faces(self) -> np.ndarray:
        return 0.5 * (self.vertices[:-1] + self.vertices[1:])

    @property
    def face_weight(self) -> np.ndarray:
        """``r^(N-1)`` at each face."""
        return self.faces ** (self.dim - 1) if self.dim > 1 else np.ones(self.n_cells)

    @property
    def volumes(self) -> np.ndarray:
        """Dual-cell measure ``w_i * r_i^(N-1)`` for every interior node.

        The origin cell of a ball uses its exact measure ``r^N / N`` instead.
        """
        v = self.vertices
        w = 0.5 * (v[2:] - v[:-2])
        x = self.nodes
        vol = w * x ** (self.dim - 1) if self.dim > 1 else w.copy()
        if self.symmetric_origin:
            edge = 0.5 * (v[1] + v[2])
            vol[0] = edge**self.dim / self.dim
        return vol

    @property
    def boundary_volumes(self) -> tuple[float, float]:
        """Half-cell measures attached to the two endpoints (zero at a symmetric origin)."""
        v = self.vertices
        n = self.dim
        lo = 0.0 if self.symmetric_origin else 0.5 * (v[1] - v[0]) * (v[0] ** (n - 1) if n > 1 else 1.0)
        hi = 0.5 * (v[-1] - v[-2]) * (v[-1] ** (n - 1) if n > 1 else 1.0)
        return lo, hi

    def to_dict(self) -> dict:
        g = self.geometry
        if isinstance(g, Interval):
            geo = {"kind": "interval", "x_lo": g.x_lo, "x_hi": g.x_hi, "blowup": list(g.blowup)}
        else:
            geo = {"kind": "radial", "N": g.N, "r_lo": g.r_lo, "r_hi": g.r_hi}
        return {"geometry": geo, "n_cells": self.n_cells, "grading_ratio": self.grading_ratio}


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a grid plus the two endpoint values.

    ``boundary[0]`` is ``None`` at the symmetric origin of a ball.
    """

    grid: Grid1D
    values: np.ndarray
    boundary: tuple[float | None, float | None]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise GridError(f"expected {self.grid.n_nodes} nodal values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> Field:
        return Field(self.grid, np.asarray(values, dtype=float), self.boundary)

    def with_boundary(self, boundary) -> Field:
        return Field(self.grid, self.values, tuple(boundary))

    def full(self) -> np.ndarray:
        """Values at every vertex; the origin of a ball gets its neighbour's value."""
        lo, hi = self.boundary
        first = self.values[0] if lo is None else lo
        return np.concatenate(([first], self.values, [hi]))


def build_grid(geometry: Interval | Radial, n_cells: int,
               grading_ratio: float = DEFAULT_GRADING) -> Grid1D:
    """Vertices whose cell widths shrink geometrically toward blow-up endpoints.

    Consecutive widths differ by the factor ``grading_ratio`` moving toward a
    blow-up endpoint; with two blow-up endpoints the grading is symmetric.
    """
    if n_cells < 4:
        raise GridError("n_cells must be at least 4")
    if not 0 < grading_ratio <= 1:
        raise GridError("grading_ratio must lie in (0, 1]")
    lo, hi = geometry.bounds
    if not hi > lo:
        raise GridError("geometry endpoints must be ordered")
    if isinstance(geometry, Radial) and (geometry.r_lo < 0 or geometry.N < 1):
        raise GridError("radial geometry needs N >= 1 and r_lo >= 0")
    k = np.arange(n_cells)
    left, right = geometry.blowup
    if left and right:
        steps = np.minimum(k, n_cells - 1 - k)
    elif left:
        steps = k
    elif right:
        steps = n_cells - 1 - k
    else:
        steps = np.zeros(n_cells, dtype=int)
    widths = grading_ratio ** (-steps.astype(float))
    widths = widths / widths.sum()
    vertices = lo + (hi - lo) * np.concatenate(([0.0], np.cumsum(widths)))
    vertices[-1] = hi
    return Grid1D(geometry, int(n_cells), float(grading_ratio), vertices)


# -- flux form --------------------------------------------------------------

def flux(D, p: float, eps: float = 0.0):
    """``|D|^(p-2) D``, regularised as ``(D^2+eps^2)^((p-2)/2) D`` where ``|D| < eps``."""
    D = np.asarray(D, dtype=float)
    absd = np.abs(D)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.where(absd > 0, absd ** (p - 2.0) * D, 0.0)
    if eps > 0:
        small = absd < eps
        if np.any(small):
            exact = np.where(small, (D * D + eps * eps) ** ((p - 2.0) / 2.0) * D, exact)
    return exact


def flux_derivative(D, p: float, eps: float):
    """Derivative of the regularised flux ``(D^2+eps^2)^((p-2)/2) D``."""
    D = np.asarray(D, dtype=float)
    s = D * D + eps * eps
    return s ** ((p - 2.0) / 2.0) + (p - 2.0) * D * D * s ** ((p - 4.0) / 2.0)


def _gradients(field: Field) -> np.ndarray:
    return np.diff(field.full()) / field.grid.spacing


def _face_fluxes(field: Field, p: float, eps: float) -> np.ndarray:
    F = field.grid.face_weight * flux(_gradients(field), p, eps)
    if field.grid.symmetric_origin:
        F[0] = 0.0
    return F


def p_lap_residual(field: Field, p: float, rhs, eps_reg: float = 0.0) -> np.ndarray:
    """``-(F_{i+1/2} - F_{i-1/2}) / V_i - rhs_i`` at every interior node."""
    if not np.all(np.isfinite(field.values)):
        raise GridError("field has nonfinite values")
    F = _face_fluxes(field, p, eps_reg)
    return -(F[1:] - F[:-1]) / field.grid.volumes - np.asarray(rhs, dtype=float)


@dataclass(frozen=True)
class Tridiagonal:
    """Tridiagonal operator stored as sub-, main and super-diagonal."""

    lower: np.ndarray  # length n-1, entries (i+1, i)
    diag: np.ndarray
    upper: np.ndarray  # length n-1, entries (i, i+1)

    @property
    def n(self) -> int:
        return len(self.diag)

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def solve(self, b) -> np.ndarray:
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.upper
        ab[1] = self.diag
        ab[2, :-1] = self.lower
        return solve_banded((1, 1), ab, np.asarray(b, dtype=float),
                            overwrite_ab=True, check_finite=False)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def row_scaled(self, s) -> Tridiagonal:
        s = np.asarray(s, dtype=float)
        return Tridiagonal(self.lower * s[1:], self.diag * s, self.upper * s[:-1])


def jacobian(field: Field, p: float, rhs_derivative, eps_reg: float = 1e-10) -> Tridiagonal:
    """Derivative of :func:`p_lap_residual` with respect to the nodal values.

    Face conductances use the regularised flux derivative; ``rhs_derivative``
    enters the diagonal with a minus sign.
    """
    grid = field.grid
    k = grid.face_weight * flux_derivative(_gradients(field), p, eps_reg) / grid.spacing
    if grid.symmetric_origin:
        k[0] = 0.0
    vol = grid.volumes
    diag = (k[1:] + k[:-1]) / vol - np.asarray(rhs_derivative, dtype=float)
    upper = -k[1:-1] / vol[:-1]
    lower = -k[1:-1] / vol[1:]
    return Tridiagonal(lower, diag, upper)


def discrete_energy(field: Field, p: float, H: Callable | None = None) -> float:
    """``(1/p) int r^(N-1) |u'|^p - int r^(N-1) H(x, u)``.

    The gradient term is summed cell by cell; the potential term uses the
    dual-cell measures plus half cells at the endpoints, so it is exact for
    integrands linear in ``x``.  ``H(x, t)`` is vectorised over nodes.
    """
    grid = field.grid
    # the origin cell of a ball carries zero gradient through Field.full()
    grad = np.sum(grid.face_weight * grid.spacing * np.abs(_gradients(field)) ** p) / p
    if H is None:
        return float(grad)
    pot = float(np.sum(grid.volumes * np.asarray(H(grid.nodes, field.values), dtype=float)))
    vlo, vhi = grid.boundary_volumes
    lo, hi = field.boundary
    if lo is not None and vlo > 0:
        pot += vlo * float(H(np.array([grid.vertices[0]]), np.array([lo]))[0])
    pot += vhi * float(H(np.array([grid.vertices[-1]]), np.array([hi]))[0])
    return float(grad - pot)
