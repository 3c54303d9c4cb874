"""Large (boundary blow-up) solutions of p-Laplacian logistic problems.

``-Delta_p u = lam a(x) g(u) - b(x) f(u)`` with ``u -> inf`` at the boundary
of an interval or ball, approximated by a ladder of Dirichlet problems with
growing boundary data and checked against the closed-form boundary rate.
"""

__version__ = "0.1.0"

from .asymptotics import alpha_of, eta_of, exact_profile, rate_point, residual_1d, solve_A
from .discretization import Field, Grid1D, Interval, Radial, build_grid
from .hypotheses import HypothesisReport, ProblemSpec, rate_inputs, validate
from .ladder import LadderConfig, LadderReport, RateFit, compare_rate, fit_rate, run_ladder
from .model import ABSORPTION, REACTION, NonlinearityModel, WeightModel
from .solver import DirichletProblem, SolveOptions, SolveReport, solve_dirichlet, solve_w0

__all__ = [
    "__version__",
    "ABSORPTION",
    "REACTION",
    "NonlinearityModel",
    "WeightModel",
    "Interval",
    "Radial",
    "Grid1D",
    "Field",
    "build_grid",
    "DirichletProblem",
    "SolveOptions",
    "SolveReport",
    "solve_dirichlet",
    "solve_w0",
    "LadderConfig",
    "LadderReport",
    "RateFit",
    "run_ladder",
    "fit_rate",
    "compare_rate",
    "ProblemSpec",
    "HypothesisReport",
    "validate",
    "rate_inputs",
    "alpha_of",
    "eta_of",
    "solve_A",
    "rate_point",
    "exact_profile",
    "residual_1d",
]
