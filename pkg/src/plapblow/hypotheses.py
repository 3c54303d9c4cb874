"""Numerical check of the existence and rate hypotheses for a problem.

:func:`validate` evaluates every hypothesis with a witness value and
collects a :class:`HypothesisReport`.  :func:`rate_inputs` reduces the
weights and nonlinearities to the pointwise data ``(gamma, Q, eta, R, q, m,
f_inf, g_inf)`` that the boundary-rate formulas consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .asymptotics import AsymptoticsError, alpha_of, eta_of
from .discretization import Interval, Radial
from .model import (
    ModelError,
    NonlinearityModel,
    SubsolutionError,
    WeightModel,
    check_f0,
    ko_check,
    lambda_star,
    limit_ratio,
)
from .solver import solve_w0

__all__ = [
    "ProblemSpec",
    "HypothesisReport",
    "RateInputs",
    "validate",
    "rate_inputs",
    "max_distance",
]


@dataclass(frozen=True)
class ProblemSpec:
    p: float
    lam: float
    geometry: Interval | Radial
    f: NonlinearityModel
    g: NonlinearityModel | None
    a: WeightModel
    b: WeightModel


@dataclass
class HypothesisReport:
    ko_converges: bool
    ko_integral_estimate: float
    ko_tail_exponent: float
    f0_liminf_estimate: float
    f0_ok: bool
    f1_ok: bool
    g0_ok: bool
    f1prime_ok: bool
    g0prime_ok: bool
    a0: float
    b0: float
    b_inf: float
    lambda_star: float
    lambda_ok: bool
    w0: float | None
    M0: float | None
    relaxed: bool
    passed: bool
    diagnostics: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Stable key order; non-finite reals are written as strings."""
        def num(x):
            if x is None:
                return None
            return x if math.isfinite(x) else ("inf" if x > 0 else ("-inf" if x < 0 else "nan"))

        return {
            "passed": self.passed,
            "relaxed": self.relaxed,
            "ko_converges": self.ko_converges,
            "ko_integral_estimate": num(self.ko_integral_estimate),
            "ko_tail_exponent": num(self.ko_tail_exponent),
            "f0_liminf_estimate": num(self.f0_liminf_estimate),
            "f0_ok": self.f0_ok,
            "f1_ok": self.f1_ok,
            "g0_ok": self.g0_ok,
            "f1prime_ok": self.f1prime_ok,
            "g0prime_ok": self.g0prime_ok,
            "a0": num(self.a0),
            "b0": num(self.b0),
            "b_inf": num(self.b_inf),
            "lambda_star": num(self.lambda_star),
            "lambda_ok": self.lambda_ok,
            "w0": num(self.w0),
            "M0": num(self.M0),
            "diagnostics": [
                {"hypothesis": d["hypothesis"], "witness": num(d["witness"]), "message": d["message"]}
                for d in self.diagnostics
            ],
        }


def max_distance(geometry: Interval | Radial) -> float:
    """Largest distance to the blow-up boundary inside the domain."""
    lo, hi = geometry.bounds
    if isinstance(geometry, Radial):
        return hi - lo if lo > 0 else hi
    return 0.5 * (hi - lo) if all(geometry.blowup) else hi - lo


def _tail(model: NonlinearityModel | None):
    if model is None:
        return None, None
    e, c = model.exponent, model.asympt_coeff
    return (e if math.isfinite(e) else None), c


def validate(spec: ProblemSpec, strict: bool = True, w0: float | None = None) -> HypothesisReport:
    """Evaluate every hypothesis of the existence theorem and the rate theorem.

    Required for ``passed``: Keller-Osserman, (f_0), (f_1), (g_0), a finite
    ``a0``, ``b0 > 0`` and ``lam < lambda_star``.  In relaxed mode (f_1)(i)
    is replaced by ``lim f/s^(p-1) < inf`` (``a0 >= 0``) or
    ``< 1 / sup b`` (``a0 < 0``).  ``w0`` may be supplied to skip the
    torsion-like solve that ``lambda_star`` needs when ``a0 < 0``.
    """
    p = spec.p
    diags: list[dict] = []

    def fail(name, witness, message):
        diags.append({"hypothesis": name, "witness": float(witness), "message": message})

    ko = ko_check(spec.f, p)
    if not ko.converges:
        fail("KO", ko.tail_exponent,
             "Keller-Osserman integral indeterminate (oscillatory tail)" if ko.indeterminate
             else "Keller-Osserman integral does not converge (tail exponent >= -1)")

    f0 = check_f0(spec.f, p)
    if not f0.holds:
        fail("f0", f0.liminf_estimate, "liminf of inf{f(t)/t^(p-1), t>=s} / (f(s)/s^(p-1)) is not positive")

    d_max = max_distance(spec.geometry)
    a0 = spec.a.infimum(d_max)
    b0 = spec.b.infimum(d_max)
    b_inf = spec.b.supremum(d_max)
    if not a0 > -math.inf:
        fail("a0", a0, "essential infimum of a must be finite")
    if not b0 > 0:
        fail("b0", b0, "essential infimum of b must be positive")

    f_zero = limit_ratio(spec.f, p, "zero")
    f_inf_ratio = limit_ratio(spec.f, p, "inf")
    if strict:
        f1_i = f_zero == 0
        if not f1_i:
            fail("f1(i)", f_zero, "lim f(s)/s^(p-1) as s->0 must vanish (strict mode)")
    elif a0 >= 0:
        f1_i = math.isfinite(f_zero)
        if not f1_i:
            fail("f1(i)", f_zero, "relaxed mode with a0 >= 0 needs lim f(s)/s^(p-1) < inf as s->0")
    else:
        bound = 1.0 / b_inf if b_inf > 0 else math.inf
        f1_i = f_zero < bound
        if not f1_i:
            fail("f1(i)", f_zero, f"relaxed mode with a0 < 0 needs lim f(s)/s^(p-1) < 1/sup b = {bound:.6g}")
    f1_ii = f_inf_ratio == math.inf
    if not f1_ii:
        fail("f1(ii)", f_inf_ratio, "lim f(s)/s^(p-1) as s->inf must be infinite")
    f1_ok = f1_i and f1_ii

    if spec.g is None:
        g0_ok = True
    else:
        g_inf_ratio = limit_ratio(spec.g, p, "inf")
        g0_ok = math.isfinite(g_inf_ratio)
        if not g0_ok:
            fail("g0(ii)", g_inf_ratio, "lim g(s)/s^(p-1) as s->inf must be finite")

    q, f_inf = _tail(spec.f)
    f1prime_ok = q is not None and q > p - 1 and 0 < f_inf < math.inf
    if not f1prime_ok:
        fail("f1'", q if q is not None else math.nan,
             "f needs a power tail f ~ f_inf s^q with q > p-1 and 0 < f_inf < inf")
    if spec.g is None:
        g0prime_ok = True
    else:
        m, g_inf = _tail(spec.g)
        g0prime_ok = m is not None and m <= p - 1 and 0 <= g_inf < math.inf
        if not g0prime_ok:
            fail("g0'", m if m is not None else math.nan,
                 "g needs a power tail g ~ g_inf s^m with m <= p-1")

    lam_star, M0 = math.inf, None
    if a0 < 0 and spec.g is not None:
        if not math.isfinite(b_inf):
            lam_star = 0.0
            fail("lambda*", b_inf, "sup b is infinite; the sub-solution threshold is unavailable")
        else:
            if w0 is None:
                w0, _ = solve_w0(p, spec.geometry)
            try:
                res = lambda_star(spec.f, spec.g, p, a0, b_inf, w0)
                lam_star, M0 = res.value, res.M0
            except (SubsolutionError, ModelError) as exc:
                lam_star = 0.0
                fail("lambda*", 0.0, str(exc))
    lambda_ok = spec.lam < lam_star
    if not lambda_ok and lam_star > 0:
        fail("lambda*", lam_star, f"lambda={spec.lam:g} is not below lambda*={lam_star:.6g}")

    passed = bool(ko.converges and f0.holds and f1_ok and g0_ok and a0 > -math.inf
                  and b0 > 0 and lambda_ok)
    return HypothesisReport(
        ko_converges=ko.converges,
        ko_integral_estimate=ko.integral,
        ko_tail_exponent=ko.tail_exponent,
        f0_liminf_estimate=f0.liminf_estimate,
        f0_ok=f0.holds,
        f1_ok=f1_ok,
        g0_ok=g0_ok,
        f1prime_ok=f1prime_ok,
        g0prime_ok=g0prime_ok,
        a0=a0,
        b0=b0,
        b_inf=b_inf,
        lambda_star=lam_star,
        lambda_ok=lambda_ok,
        w0=w0,
        M0=M0,
        relaxed=not strict,
        passed=passed,
        diagnostics=diags,
    )


@dataclass(frozen=True)
class RateInputs:
    p: float
    q: float
    m: float
    gamma: float
    Q: float
    eta: float
    R: float
    lam: float
    f_inf: float
    g_inf: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rate_inputs(spec: ProblemSpec) -> RateInputs:
    """Boundary data for the rate formulas, read off the weights at ``d -> 0``.

    ``Q = lim d^gamma b`` with ``gamma`` the declared exponent of ``b``
    (a positive offset with ``gamma < 0`` dominates, giving ``gamma = 0``);
    ``R = lim d^eta a`` with ``eta`` the critical exponent: ``0``, the
    coefficient of ``a``, or infinite (rejected) depending on the exponent of ``a``.
    """
    p = spec.p
    q, f_inf = _tail(spec.f)
    if q is None:
        raise AsymptoticsError("absorption f has no declared power tail")
    if spec.g is None:
        m, g_inf = p - 1.0, 0.0
    else:
        m, g_inf = _tail(spec.g)
        if m is None:
            raise AsymptoticsError("reaction g has no declared power tail")
    b = spec.b
    if b.coeff == 0.0 or b.boundary_exponent == 0.0:
        gamma, Q = 0.0, b.coeff + b.offset
    elif b.boundary_exponent > 0:
        raise AsymptoticsError("absorption weight exponent gamma must be <= 0")
    elif b.offset > 0:
        gamma, Q = 0.0, b.offset
    else:
        gamma, Q = b.boundary_exponent, b.coeff
    alpha_of(p, q, gamma)
    eta = eta_of(p, q, m, gamma)
    a = spec.a
    # eta >= p > 0, so the bounded offset of a never survives the limit
    if a.coeff == 0.0 or a.boundary_exponent < eta and not math.isclose(a.boundary_exponent, eta):
        R = 0.0
    elif math.isclose(a.boundary_exponent, eta, rel_tol=1e-12):
        R = a.coeff
    else:
        R = math.inf
    if R == math.inf:
        raise AsymptoticsError("reaction weight a blows up faster than d^-eta; the rate formula does not apply")
    lam = spec.lam if spec.g is not None else 0.0
    return RateInputs(p=p, q=q, m=m, gamma=gamma, Q=Q, eta=eta, R=R, lam=lam,
                      f_inf=f_inf, g_inf=g_inf)
