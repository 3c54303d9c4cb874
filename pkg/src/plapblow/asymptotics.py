"""Closed-form boundary asymptotics of large solutions.

Near a boundary point a large solution behaves like ``A * d**(-alpha)``.
The exponent depends on ``p``, the absorption growth ``q`` and the
boundary exponent ``gamma`` of the absorption weight; the constant ``A`` is
the positive root of a scalar balance between the p-Laplacian of the
profile, the absorption and the reaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "AsymptoticsError",
    "RatePoint",
    "alpha_of",
    "eta_of",
    "profile_coefficient",
    "balance",
    "solve_A",
    "rate_point",
    "exact_profile",
    "residual_1d",
    "corollary_constant",
]

BRACKET = (1e-12, 1e12)


class AsymptoticsError(ValueError):
    pass


@dataclass(frozen=True)
class RatePoint:
    alpha: float
    eta: float
    Q: float
    R: float
    A: float
    lam: float


def alpha_of(p: float, q: float, gamma: float) -> float:
    """Blow-up exponent ``(p - gamma) / (q - p + 1)``."""
    if not q > p - 1:
        raise AsymptoticsError("supercritical absorption required (q > p - 1)")
    if gamma > 0:
        raise AsymptoticsError("absorption weight exponent gamma must be <= 0")
    return (p - gamma) / (q - p + 1)


def eta_of(p: float, q: float, m: float, gamma: float) -> float:
    """Critical boundary exponent of the reaction weight."""
    if not q > p - 1:
        raise AsymptoticsError("supercritical absorption required (q > p - 1)")
    if m > p - 1:
        raise AsymptoticsError("reaction growth m must satisfy m <= p - 1")
    return (p - 1 - m) / (q - p + 1) * (p - gamma) + p


def profile_coefficient(p: float, alpha: float) -> float:
    """``(p-1) alpha^(p-1) (1+alpha)``: minus the p-Laplacian of ``x^-alpha`` up to powers of x."""
    return (p - 1) * alpha ** (p - 1) * (1 + alpha)


def balance(A, p, q, m, alpha, Q, R, lam=1.0, f_inf=1.0, g_inf=1.0):
    """``f_inf Q A^(q-m) - c A^(p-m-1) - lam g_inf R`` whose positive root is ``A``."""
    c = profile_coefficient(p, alpha)
    return f_inf * Q * A ** (q - m) - c * A ** (p - m - 1) - lam * g_inf * R


def _balance_derivative(A, p, q, m, alpha, Q, R, lam, f_inf, g_inf):
    c = profile_coefficient(p, alpha)
    return (f_inf * Q * (q - m) * A ** (q - m - 1)
            - c * (p - m - 1) * A ** (p - m - 2))


def solve_A(p: float, q: float, m: float, alpha: float, Q: float, R: float,
            lam: float = 1.0, f_inf: float = 1.0, g_inf: float = 1.0) -> float:
    """Unique positive root of :func:`balance`.

    The search starts on ``[1e-12, 1e12]`` and widens geometrically (up to
    ``[1e-300, 1e300]``) while the endpoint signs do not differ.  Log-midpoint
    bisection narrows the bracket, then safeguarded Newton steps polish the
    root.
    """
    if not q > p - 1:
        raise AsymptoticsError("supercritical absorption required (q > p - 1)")
    if m > p - 1:
        raise AsymptoticsError("reaction growth m must satisfy m <= p - 1")
    if not (Q * f_inf > 0):
        raise AsymptoticsError("f_inf * Q must be positive")
    if R * g_inf * lam < 0:
        raise AsymptoticsError("lam * g_inf * R must be nonnegative")
    if not alpha > 0:
        raise AsymptoticsError("alpha must be positive")
    args = (p, q, m, alpha, Q, R, lam, f_inf, g_inf)
    lo, hi = BRACKET
    h_lo, h_hi = balance(lo, *args), balance(hi, *args)
    while not (h_lo < 0 < h_hi) and lo > 1e-300:
        if not h_lo < 0:
            lo = max(lo**2 if lo < 1 else lo * 1e-12, 1e-300)
            h_lo = balance(lo, *args)
        if not h_hi > 0:
            hi = min(hi**2, 1e300)
            h_hi = balance(hi, *args)
        if hi >= 1e300 and not h_hi > 0:
            break
    if not (h_lo < 0 < h_hi):
        raise AsymptoticsError(
            f"cannot bracket the balance root in [{lo:g}, {hi:g}]: h={h_lo:g}, {h_hi:g}")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if balance(mid, *args) < 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-6:
            break
    A = math.sqrt(lo * hi)
    for _ in range(50):
        h = balance(A, *args)
        dh = _balance_derivative(A, *args)
        if dh <= 0:
            break
        step = A - h / dh
        if not (lo <= step <= hi):
            break
        if balance(step, *args) < 0:
            lo = step
        else:
            hi = step
        converged = abs(step - A) <= 4e-16 * A
        A = step
        if converged:
            break
    return A


def rate_point(p, q, m, gamma, Q, R, lam=1.0, f_inf=1.0, g_inf=1.0) -> RatePoint:
    alpha = alpha_of(p, q, gamma)
    eta = eta_of(p, q, m, gamma)
    A = solve_A(p, q, m, alpha, Q, R, lam, f_inf, g_inf)
    return RatePoint(alpha=alpha, eta=eta, Q=Q, R=R, A=A, lam=lam)


def exact_profile(A: float, alpha: float, x):
    """``A * x**(-alpha)``."""
    try:
        bad = x <= 0
        bad = bool(bad) if not hasattr(bad, "any") else bool(bad.any())
    except TypeError:
        bad = True
    if bad:
        raise AsymptoticsError("profile is defined for x > 0")
    return A * x ** (-alpha)


def residual_1d(p, q, m, gamma, eta, Q, R, A, alpha, x, relative: bool = True) -> float:
    """Pointwise residual of ``u = A x^-alpha`` in ``-(|u'|^(p-2) u')' = R x^-eta u^m - Q x^-gamma u^q``.

    With ``relative=True`` the residual is divided by the largest of the
    three term magnitudes.
    """
    if not x > 0:
        raise AsymptoticsError("residual is defined for x > 0")
    # terms are assembled in log form so that huge A or extreme x cannot overflow
    lx = math.log(x)
    lu = math.log(A) - alpha * lx
    terms = [(-1.0, (p - 1) * math.log(alpha * A) + math.log((alpha + 1) * (p - 1))
              - ((alpha + 1) * (p - 1) + 1) * lx)]
    if R > 0:
        terms.append((-1.0, math.log(R) - eta * lx + m * lu))
    if Q > 0:
        terms.append((1.0, math.log(Q) - gamma * lx + q * lu))
    top = max(lt for _, lt in terms)
    r_rel = math.fsum(sign * math.exp(lt - top) for sign, lt in terms)
    if relative:
        return r_rel
    return r_rel * math.exp(top)


def corollary_constant(p: float, q: float, b_at_boundary: float) -> tuple[float, float]:
    """Printed closed-form constant for pure power nonlinearities, and the balance root.

    Returns ``(printed, balance_root)``.  The first is
    ``b^(-1/(q-p+1)) K^(-1/(q-p+1))`` with
    ``K = (p-1)(q+1)p^(p-1)/(q-p+1)^p``; the second is :func:`solve_A` for
    ``m = p-1``, ``gamma = 0``, ``R = 0``.  They are reported side by side and
    are not expected to agree.
    """
    if not q > p - 1:
        raise AsymptoticsError("supercritical absorption required (q > p - 1)")
    k = (p - 1) * (q + 1) * p ** (p - 1) / (q - p + 1) ** p
    printed = b_at_boundary ** (-1 / (q - p + 1)) * k ** (-1 / (q - p + 1))
    alpha = alpha_of(p, q, 0.0)
    root = solve_A(p, q, p - 1, alpha, b_at_boundary, 0.0)
    return printed, root
