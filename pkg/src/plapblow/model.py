"""Nonlinearities, boundary weights and the envelope machinery built on them.

The absorption ``f`` and the reaction ``g`` are :class:`NonlinearityModel`
values; the weights ``a`` and ``b`` are :class:`WeightModel` values of the
form ``coeff * d**(-exponent) + offset`` in the distance ``d`` to the
boundary.  Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ABSORPTION",
    "REACTION",
    "NonlinearityModel",
    "WeightModel",
    "ModelError",
    "evaluate",
    "envelope_sup_below",
    "envelope_sup_above",
    "envelope_inf_above",
    "KOResult",
    "ko_check",
    "F0Result",
    "check_f0",
    "LambdaStar",
    "lambda_star",
    "limit_ratio",
    "decaying_ratio_absorption",
]

ABSORPTION = "absorption-f"
REACTION = "reaction-g"

# log-spaced sampling window used for envelopes of non-analytic models
ENVELOPE_T_MIN = 1e-8
ENVELOPE_T_MAX = 1e8
ENVELOPE_NODES = 2**17


class ModelError(ValueError):
    """Raised for invalid model construction or out-of-domain evaluation."""


@dataclass(frozen=True)
class NonlinearityModel:
    """A nonnegative function of ``s > 0`` with a declared power-law tail.

    ``form`` is one of ``power`` (``coeff * s**exponent``), ``powersum``
    (sum of such terms), ``tabulated`` (log-log interpolated samples) or
    ``callable`` (an arbitrary vectorised function).  ``exponent`` and
    ``asympt_coeff`` describe the behaviour as ``s -> inf``.
    """

    kind: str
    form: str
    exponent: float
    asympt_coeff: float
    table: tuple[tuple[float, float], ...] | None = None
    tail_exponent: float | None = None
    terms: tuple[tuple[float, float], ...] | None = None
    func: Callable | None = None
    dfunc: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in (ABSORPTION, REACTION):
            raise ModelError(f"unknown nonlinearity kind {self.kind!r}")
        if self.form not in ("power", "powersum", "tabulated", "callable"):
            raise ModelError(f"unknown nonlinearity form {self.form!r}")
        if not (self.asympt_coeff >= 0 and math.isfinite(self.asympt_coeff)):
            raise ModelError("asymptotic coefficient must be finite and nonnegative")
        if self.form == "tabulated":
            if not self.table or len(self.table) < 2:
                raise ModelError("tabulated form needs at least two (s, value) pairs")
            s = np.array([row[0] for row in self.table], dtype=float)
            v = np.array([row[1] for row in self.table], dtype=float)
            if np.any(s <= 0) or np.any(np.diff(s) <= 0):
                raise ModelError("table abscissae must be positive and strictly increasing")
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ModelError("table values must be finite and nonnegative")
        if self.form == "powersum":
            if not self.terms:
                raise ModelError("powersum form needs at least one (coeff, exponent) term")
            if any(c < 0 for c, _ in self.terms):
                raise ModelError("powersum coefficients must be nonnegative")
        if self.form == "callable" and self.func is None:
            raise ModelError("callable form needs func")

    # -- constructors -----------------------------------------------------

    @classmethod
    def power(cls, kind: str, exponent: float, coeff: float = 1.0) -> NonlinearityModel:
        return cls(kind=kind, form="power", exponent=float(exponent), asympt_coeff=float(coeff))

    @classmethod
    def powersum(cls, kind: str, terms) -> NonlinearityModel:
        terms = tuple((float(c), float(e)) for c, e in terms)
        live = [(c, e) for c, e in terms if c > 0] or list(terms)
        top = max(e for _, e in live)
        coeff = sum(c for c, e in live if e == top)
        return cls(kind=kind, form="powersum", exponent=top, asympt_coeff=coeff, terms=terms)

    @classmethod
    def tabulated(cls, kind: str, table, tail_exponent: float | None = None) -> NonlinearityModel:
        table = tuple((float(s), float(v)) for s, v in table)
        s_last, v_last = table[-1]
        if tail_exponent is None:
            exponent, coeff = math.nan, 0.0
        else:
            exponent = float(tail_exponent)
            coeff = v_last / s_last**exponent
        return cls(kind=kind, form="tabulated", exponent=exponent, asympt_coeff=coeff,
                   table=table, tail_exponent=tail_exponent)

    @classmethod
    def from_callable(cls, kind: str, func: Callable, exponent: float = math.nan,
                      coeff: float = 0.0, dfunc: Callable | None = None,
                      name: str = "") -> NonlinearityModel:
        return cls(kind=kind, form="callable", exponent=float(exponent), asympt_coeff=float(coeff),
                   func=func, dfunc=dfunc, name=name)

    # -- evaluation -------------------------------------------------------

    @property
    def has_analytic_tail(self) -> bool:
        """True when the behaviour beyond the sampling window is known exactly."""
        return self.form in ("power", "powersum") or (
            self.form == "tabulated" and self.tail_exponent is not None)

    def _power_terms(self):
        if self.form == "power":
            return ((self.asympt_coeff, self.exponent),)
        return self.terms

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        if np.any(~(arr > 0)):
            raise ModelError("nonlinearities are evaluated at positive arguments only")
        if self.form in ("power", "powersum"):
            out = np.zeros_like(arr)
            for c, e in self._power_terms():
                out = out + c * arr**e
        elif self.form == "tabulated":
            out = self._interp(np.atleast_1d(arr)).reshape(arr.shape)
        else:
            out = np.asarray(self.func(arr), dtype=float)
        return float(out) if np.ndim(s) == 0 else out

    def derivative(self, s):
        arr = np.asarray(s, dtype=float)
        if self.form in ("power", "powersum"):
            out = np.zeros_like(arr)
            for c, e in self._power_terms():
                if e != 0:
                    out = out + c * e * arr**(e - 1.0)
        elif self.form == "callable" and self.dfunc is not None:
            out = np.asarray(self.dfunc(arr), dtype=float)
        else:
            h = 1e-6 * arr
            out = (np.asarray(self(arr + h)) - np.asarray(self(arr - h))) / (2.0 * h)
        return float(out) if np.ndim(s) == 0 else out

    def _interp(self, s):
        ts = np.array([row[0] for row in self.table])
        vs = np.array([row[1] for row in self.table])
        inside = (s >= ts[0]) & (s <= ts[-1])
        if not np.all(inside) and self.tail_exponent is None:
            raise ModelError(
                f"tabulated query outside [{ts[0]:g}, {ts[-1]:g}] without a tail exponent")
        out = np.empty_like(s)
        k = np.clip(np.searchsorted(ts, s, side="right") - 1, 0, len(ts) - 2)
        t0, t1, v0, v1 = ts[k], ts[k + 1], vs[k], vs[k + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            loglog = (v0 > 0) & (v1 > 0)
            w = np.where(loglog, np.log(s / t0) / np.log(t1 / t0), (s - t0) / (t1 - t0))
            interp = np.where(loglog, v0 * (v1 / np.where(v0 > 0, v0, 1.0)) ** w,
                              v0 + (v1 - v0) * w)
        out[:] = interp
        above = s > ts[-1]
        if np.any(above):
            out[above] = vs[-1] * (s[above] / ts[-1]) ** self.tail_exponent
        below = s < ts[0]
        if np.any(below):
            if vs[0] > 0 and vs[1] > 0:
                slope = math.log(vs[1] / vs[0]) / math.log(ts[1] / ts[0])
                out[below] = vs[0] * (s[below] / ts[0]) ** slope
            else:
                out[below] = vs[0] * s[below] / ts[0]
        return out


@dataclass(frozen=True)
class WeightModel:
    """``coeff * d**(-boundary_exponent) + offset`` for distance ``d > 0``."""

    coeff: float = 0.0
    boundary_exponent: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if not (self.coeff >= 0 and math.isfinite(self.coeff)):
            raise ModelError("weight coefficient must be finite and nonnegative")
        if not math.isfinite(self.offset):
            raise ModelError("weight offset must be finite")

    @classmethod
    def constant(cls, value: float) -> WeightModel:
        return cls(coeff=0.0, boundary_exponent=0.0, offset=float(value))

    def __call__(self, d):
        arr = np.asarray(d, dtype=float)
        if np.any(~(arr > 0)):
            raise ModelError("weights are evaluated at positive distances only")
        if self.coeff == 0.0:
            out = np.full_like(arr, self.offset)
        else:
            out = self.coeff * arr ** (-self.boundary_exponent) + self.offset
        return float(out) if np.ndim(d) == 0 else out

    def infimum(self, d_max: float) -> float:
        """Essential infimum over ``d`` in ``(0, d_max]``."""
        if self.coeff == 0.0 or self.boundary_exponent == 0.0:
            return self.coeff + self.offset
        if self.boundary_exponent > 0:
            return self.coeff * d_max ** (-self.boundary_exponent) + self.offset
        return self.offset

    def supremum(self, d_max: float) -> float:
        """Essential supremum over ``d`` in ``(0, d_max]``; may be ``inf``."""
        if self.coeff == 0.0 or self.boundary_exponent == 0.0:
            return self.coeff + self.offset
        if self.boundary_exponent > 0:
            return math.inf
        return self.coeff * d_max ** (-self.boundary_exponent) + self.offset


def evaluate(model: NonlinearityModel | WeightModel, s_or_d):
    """Evaluate a nonlinearity at ``s`` or a weight at distance ``d``."""
    return model(s_or_d)


def decaying_ratio_absorption(p: float, sigma: Callable | None = None) -> NonlinearityModel:
    """The absorption that satisfies neither (f_0) nor Keller-Osserman.

    ``sigma(t) t**(p-1)`` below 1 and ``t**(p-1) exp(-t)`` above; the default
    ``sigma(t) = t / e`` is continuous with ``sigma(1) = 1/e`` and ``sigma(0+) = 0``.
    """
    if sigma is None:
        def sigma(t):
            return t / math.e

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1.0, sigma(np.minimum(t, 1.0)) * t ** (p - 1.0),
                        t ** (p - 1.0) * np.exp(-np.maximum(t, 1.0)))

    return NonlinearityModel.from_callable(ABSORPTION, f, name="decaying-ratio")


# -- envelopes --------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _ratio_grid(model: NonlinearityModel, p: float):
    t = np.geomspace(ENVELOPE_T_MIN, ENVELOPE_T_MAX, ENVELOPE_NODES)
    r = np.asarray(model(t)) / t ** (p - 1.0)
    prefix_max = np.maximum.accumulate(r)
    suffix_max = np.maximum.accumulate(r[::-1])[::-1]
    suffix_min = np.minimum.accumulate(r[::-1])[::-1]
    return t, r, prefix_max, suffix_max, suffix_min


def _power_exponents(model: NonlinearityModel):
    return [e for c, e in model._power_terms() if c > 0]


def envelope_sup_below(f: NonlinearityModel, p: float, s):
    """``s**(p-1) * sup{f(t)/t**(p-1) : t <= s} + s**p``.

    Returns ``inf`` when the ratio is unbounded as ``t -> 0+``.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)):
        raise ModelError("envelopes are defined for s > 0")
    if f.form == "power":
        q = f.exponent
        c = f.asympt_coeff
        if c == 0.0:
            sup = np.zeros_like(s_arr)
        elif q > p - 1:
            sup = c * s_arr ** (q - p + 1.0)
        elif q == p - 1:
            sup = np.full_like(s_arr, c)
        else:
            sup = np.full_like(s_arr, math.inf)
    else:
        if f.form == "powersum" and any(e < p - 1 for e in _power_exponents(f)):
            sup = np.full_like(s_arr, math.inf)
        else:
            t, r, prefix_max, _, _ = _ratio_grid(f, p)
            k = np.searchsorted(t, s_arr, side="right") - 1
            own = np.asarray(f(s_arr)) / s_arr ** (p - 1.0)
            sup = np.where(k >= 0, np.maximum(prefix_max[np.clip(k, 0, None)], own), own)
    out = s_arr ** (p - 1.0) * sup + s_arr**p
    return float(out) if np.ndim(s) == 0 else out


def envelope_sup_above(g: NonlinearityModel, p: float, s):
    """``s**(p-1) * sup{g(t)/t**(p-1) : t >= s} + 1``.

    Raises :class:`ModelError` when the suffix supremum is unbounded, i.e.
    ``g(t)/t**(p-1)`` is not bounded at infinity.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)):
        raise ModelError("envelopes are defined for s > 0")
    if g.form in ("power", "powersum") and any(e > p - 1 for e in _power_exponents(g)):
        raise ModelError("g(t)/t^(p-1) is unbounded as t -> inf; suffix supremum diverges")
    if g.form == "tabulated" and g.tail_exponent is not None and g.tail_exponent > p - 1 \
            and g.table[-1][1] > 0:
        raise ModelError("tabulated g tail grows faster than t^(p-1); suffix supremum diverges")
    if g.form == "power":
        m = g.exponent
        # ratio is nonincreasing (m <= p-1): supremum attained at t = s
        sup = g.asympt_coeff * s_arr ** (m - p + 1.0)
    else:
        t, r, _, suffix_max, _ = _ratio_grid(g, p)
        k = np.searchsorted(t, s_arr, side="left")
        own = np.asarray(g(s_arr)) / s_arr ** (p - 1.0)
        inside = k < len(t)
        sup = np.where(inside, np.maximum(suffix_max[np.clip(k, 0, len(t) - 1)], own), own)
        if not np.all(np.isfinite(sup)):
            raise ModelError("suffix supremum of g(t)/t^(p-1) is not finite")
    out = s_arr ** (p - 1.0) * sup + 1.0
    return float(out) if np.ndim(s) == 0 else out


def envelope_inf_above(f: NonlinearityModel, p: float, s):
    """``s**(p-1) * inf{f(t)/t**(p-1) : t >= s}``.

    For models without an analytic tail the infimum is taken over the
    sampling window only; see :attr:`NonlinearityModel.has_analytic_tail`.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)):
        raise ModelError("envelopes are defined for s > 0")
    if f.form == "power":
        q = f.exponent
        if q >= p - 1:
            inf = f.asympt_coeff * s_arr ** (q - p + 1.0)
        else:
            inf = np.zeros_like(s_arr)
    else:
        t, r, _, _, suffix_min = _ratio_grid(f, p)
        k = np.searchsorted(t, s_arr, side="left")
        own = np.asarray(f(s_arr)) / s_arr ** (p - 1.0)
        inside = k < len(t)
        inf = np.where(inside, np.minimum(suffix_min[np.clip(k, 0, len(t) - 1)], own), own)
        if f.has_analytic_tail and f.exponent < p - 1:
            inf = np.zeros_like(s_arr)
    out = s_arr ** (p - 1.0) * inf
    return float(out) if np.ndim(s) == 0 else out


# -- hypotheses on f --------------------------------------------------------

def limit_ratio(model: NonlinearityModel, p: float, end: str) -> float:
    """Estimate ``lim model(s)/s**(p-1)`` as ``s -> 0+`` (``end="zero"``) or ``s -> inf``.

    Power forms are exact.  Otherwise the local log-log slope of the ratio
    over the two outermost decades of the sampling window decides between
    ``0``, a finite value and ``inf``.
    """
    if model.form in ("power", "powersum"):
        terms = [(c, e - (p - 1)) for c, e in model._power_terms() if c > 0]
        if not terms:
            return 0.0
        key = min if end == "zero" else max
        lead = key(e for _, e in terms)
        if lead == 0:
            return sum(c for c, e in terms if e == 0)
        return 0.0 if (lead > 0) == (end == "zero") else math.inf
    if end == "zero":
        t = np.geomspace(ENVELOPE_T_MIN, ENVELOPE_T_MIN * 100, 17)
    else:
        t = np.geomspace(ENVELOPE_T_MAX / 100, ENVELOPE_T_MAX, 17)
    r = np.asarray(model(t)) / t ** (p - 1.0)
    if np.all(r == 0):
        return 0.0
    if np.any(r <= 0):
        return 0.0 if r[0 if end == "zero" else -1] == 0 else float(r[0 if end == "zero" else -1])
    slope = np.polyfit(np.log(t), np.log(r), 1)[0]
    if end == "zero":
        slope = -slope
    if abs(slope) < 1e-3:
        return float(r[0] if end == "zero" else r[-1])
    return math.inf if slope > 0 else 0.0


@dataclass(frozen=True)
class KOResult:
    converges: bool
    integral: float
    tail_exponent: float
    indeterminate: bool = False


KO_T_MAX = 1e8
KO_NODES_PER_DECADE = 8
KO_FIT_RMS_GUARD = 0.05
KO_EXPONENT_MARGIN = 1e-6


def _antiderivative_nodes(f: NonlinearityModel, t: np.ndarray) -> np.ndarray:
    """``F(t_k) = int_0^{t_k} f`` by adaptive quadrature, segment by segment."""
    def scalar_f(x):
        return float(f(x)) if x > 0 else 0.0

    F = np.empty_like(t)
    acc, _ = integrate.quad(scalar_f, 0.0, t[0], epsabs=0.0, epsrel=1e-12, limit=200)
    F[0] = acc
    for k in range(1, len(t)):
        seg, _ = integrate.quad(scalar_f, t[k - 1], t[k], epsabs=0.0, epsrel=1e-12, limit=200)
        acc += seg
        F[k] = acc
    return F


def _power_segment_integral(g0, g1, t0, t1):
    ratio = t1 / t0
    e = math.log(g1 / g0) / math.log(ratio)
    if abs(e + 1.0) < 1e-12:
        return g0 * t0 * math.log(ratio)
    return g0 * t0 * (ratio ** (e + 1.0) - 1.0) / (e + 1.0)


def ko_check(f: NonlinearityModel, p: float, t_max: float = KO_T_MAX) -> KOResult:
    """Keller-Osserman test for ``int_1^inf F(t)**(-1/p) dt``.

    Convergence requires both that the per-decade partial integrals shrink
    and that the fitted tail exponent of ``F**(-1/p)`` over the last two
    decades lies below ``-1``.  An erratic tail fit is reported as
    indeterminate instead of being forced into a yes/no answer.
    """
    if f.kind != ABSORPTION:
        raise ModelError("ko_check applies to absorption nonlinearities")
    decades = int(round(math.log10(t_max / ENVELOPE_T_MIN)))
    t = np.geomspace(ENVELOPE_T_MIN, t_max, decades * KO_NODES_PER_DECADE + 1)
    F = _antiderivative_nodes(f, t)
    start = int(np.searchsorted(t, 1.0 - 1e-12))
    tt, FF = t[start:], F[start:]
    if np.any(FF <= 0):
        return KOResult(False, math.inf, math.nan, indeterminate=True)
    G = FF ** (-1.0 / p)
    pieces = np.array([_power_segment_integral(G[k], G[k + 1], tt[k], tt[k + 1])
                       for k in range(len(tt) - 1)])
    per_decade = pieces.reshape(-1, KO_NODES_PER_DECADE).sum(axis=1)
    partial = float(pieces.sum())

    fit = tt >= t_max / 100.0 * (1 - 1e-12)
    x, y = np.log(tt[fit]), np.log(G[fit])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coef[0])
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    if rms > KO_FIT_RMS_GUARD:
        return KOResult(False, partial, slope, indeterminate=True)
    stabilised = per_decade[-1] < per_decade[-2] * (1.0 - 1e-9)
    converges = bool(stabilised and slope < -1.0 - KO_EXPONENT_MARGIN)
    if converges:
        tail = G[-1] * tt[-1] / (-(slope + 1.0))
        return KOResult(True, partial + tail, slope)
    return KOResult(False, partial, slope)


class F0Result(NamedTuple):
    liminf_estimate: float
    holds: bool


def check_f0(f: NonlinearityModel, p: float, eps_f0: float = 1e-6) -> F0Result:
    """Ratio ``inf{f(t)/t^(p-1), t >= s} / (f(s)/s^(p-1))`` over a geometric grid.

    The liminf is approximated by the minimum over the largest sampled
    decade; ``holds`` compares it with ``eps_f0``.
    """
    s = np.geomspace(ENVELOPE_T_MAX / 10.0, ENVELOPE_T_MAX, 4 * KO_NODES_PER_DECADE + 1)
    fs = np.asarray(f(s))
    fhat = np.asarray(envelope_inf_above(f, p, s))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fs > 0, fhat / fs, 0.0)
    est = float(np.min(ratio))
    return F0Result(est, bool(est > eps_f0))


# -- threshold lambda_* -----------------------------------------------------

class LambdaStar(NamedTuple):
    value: float
    M0: float | None
    phi_max: float | None


class SubsolutionError(ModelError):
    pass


def _phi(f, g, p, b_inf, w0):
    def phi(M):
        M = np.asarray(M, dtype=float)
        mw = M * w0
        return (mw ** (p - 1.0) / envelope_sup_above(g, p, mw)) * (
            1.0 - b_inf * envelope_sup_below(f, p, M) / M ** (p - 1.0))
    return phi


def lambda_star(f: NonlinearityModel, g: NonlinearityModel, p: float, a0: float,
                b_inf: float, w0: float, grid_points: int = 4097,
                m_range: tuple[float, float] = (1e-6, 1e6)) -> LambdaStar:
    """Largest reaction strength covered by the sub-solution construction.

    ``+inf`` when ``a0 >= 0``.  Otherwise ``-max_M phi(M) / a0`` with
    ``phi(M) = (M w0)^(p-1) / g_hat(M w0) * (1 - b_inf f_tilde(M) / M^(p-1))``,
    located by a log-grid scan and refined by golden-section search.
    """
    if a0 >= 0:
        return LambdaStar(math.inf, None, None)
    if not b_inf > 0:
        raise ModelError("b_inf must be positive")
    if not 0 < w0 <= 1:
        raise ModelError("w0 must lie in (0, 1]")
    phi = _phi(f, g, p, b_inf, w0)
    logm = np.linspace(math.log(m_range[0]), math.log(m_range[1]), grid_points)
    vals = np.asarray(phi(np.exp(logm)))
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    k = int(np.argmax(vals))
    if not vals[k] > 0:
        raise SubsolutionError("sub-solution construction fails: phi(M) <= 0 for all sampled M")
    lo, hi = logm[max(k - 1, 0)], logm[min(k + 1, grid_points - 1)]

    def neg(x):
        return -float(phi(math.exp(x)))

    if 0 < k < grid_points - 1:
        try:
            res = optimize.minimize_scalar(neg, bracket=(lo, logm[k], hi), method="golden",
                                           options={"xtol": 1e-10})
            x_best, v_best = float(res.x), -float(res.fun)
        except ValueError:  # flat bracket
            x_best, v_best = float(logm[k]), float(vals[k])
        if not (lo <= x_best <= hi) or v_best < vals[k]:
            x_best, v_best = float(logm[k]), float(vals[k])
    else:
        x_best, v_best = float(logm[k]), float(vals[k])
    return LambdaStar(-v_best / a0, math.exp(x_best), v_best)
