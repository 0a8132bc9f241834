"""The f_alpha divergences, f_alpha(t) = (alpha + t)^2 ln(alpha + t) - (alpha + 1)^2 ln(alpha + 1)."""
from __future__ import annotations
import logging
import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from divlab.core.exceptions import ParameterError, PreconditionError
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator, kl
from divlab.core.models import DifferenceBounds, FAlphaBounds, ProbVec
from divlab.services.divergence import chi2_value, divergence_value, f_divergence, renyi_value

logger = logging.getLogger(__name__)

ALPHA_MIN = math.exp(-1.5)


def _check_alpha(alpha: float) -> float:
    a = float(alpha)
    if not (math.isfinite(a) and a >= ALPHA_MIN):
        raise ParameterError(f"alpha={alpha!r} is below exp(-3/2) = {ALPHA_MIN:.6f}; f_alpha need not be convex")
    return a


@lru_cache(maxsize=256)
def falpha_generator(alpha: float) -> Generator:
    a = _check_alpha(alpha)
    la1 = math.log1p(a)

    def fn(t):
        # (t-1)(2a+t+1) ln(a+1) + (a+t)^2 ln(1 + (t-1)/(a+1)); exactly 0 at t = 1
        return (t - 1.0) * (2.0 * a + t + 1.0) * la1 + (a + t) ** 2 * np.log1p((t - 1.0) / (a + 1.0))

    return Generator(
        name=f"f_alpha({a:g})",
        fn=fn,
        deriv1=lambda t: 2.0 * (a + t) * np.log(a + t) + (a + t),
        deriv2=lambda t: 2.0 * np.log(a + t) + 3.0,
        f_at_zero=ExtendedReal(value=-a * a * math.log1p(1.0 / a) - (2.0 * a + 1.0) * la1),
        slope_at_infinity=ExtendedReal.inf(),
        d2_monotonicity="increasing",
        t3d2_monotonicity="increasing",
    )


def k_alpha(alpha: float) -> float:
    """ln(alpha + 1) + 3/2 - 1/(3 alpha), the chi^2 lower-bound constant."""
    a = _check_alpha(alpha)
    return math.log1p(a) + 1.5 - 1.0 / (3.0 * a)


def d_falpha(alpha: float, P: ProbVec, Q: ProbVec) -> ExtendedReal:
    return f_divergence(falpha_generator(alpha), P, Q)


def binary_falpha(alpha: float, p: float, q: float) -> float:
    """d_{f_alpha}(p||q) between Bernoulli(p) and Bernoulli(q)."""
    return divergence_value(falpha_generator(alpha), np.array([1.0 - p, p]), np.array([1.0 - q, q]))


def falpha_bounds(alpha: float, P: ProbVec, Q: ProbVec) -> FAlphaBounds:
    """chi^2 and relative-entropy lower bounds and the order-3 Renyi upper bound."""
    a = _check_alpha(alpha)
    p, q = P.array, Q.array
    k = k_alpha(a)
    chi = chi2_value(p, q)
    rel = divergence_value(kl(), p, q)
    lb_kl = ExtendedReal.inf() if math.isinf(rel) else ExtendedReal.of(k * math.expm1(rel))
    d3 = renyi_value(3.0, p, q)
    if math.isinf(d3) or math.isinf(chi):
        ub = ExtendedReal.inf()
    else:
        la1 = math.log1p(a)
        ub = ExtendedReal.of((la1 + 1.5 - 1.0 / (a + 1.0)) * chi + math.expm1(2.0 * d3) / (3.0 * (a + 1.0)))
    return FAlphaBounds(lb_chi2=k * chi, lb_kl=lb_kl, ub=ub)


def asymptotic_value(alpha: float, P: ProbVec, Q: ProbVec) -> float:
    """Large-alpha approximation (ln(alpha + 1) + 3/2) chi^2(P||Q)."""
    a = _check_alpha(alpha)
    return (math.log1p(a) + 1.5) * chi2_value(P.array, Q.array)


def asymptotic_alpha_threshold(
    P: ProbVec, Q: ProbVec, eps: float, alphas: Optional[Sequence[float]] = None,
) -> Optional[float]:
    """Smallest alpha on the grid from which |D_{f_alpha} - approximation| < eps stays true."""
    if alphas is None:
        grid = np.logspace(math.log10(ALPHA_MIN), 6, 241)
        grid[0] = ALPHA_MIN
    else:
        grid = np.asarray(alphas, dtype=float)
    found = None
    for a in grid[::-1]:
        gap = abs(float(d_falpha(float(a), P, Q)) - asymptotic_value(float(a), P, Q))
        if gap >= eps:
            break
        found = float(a)
    if found is None:
        logger.debug("no alpha on the grid brings the approximation within %g", eps)
    return found


def _mixture(alpha: float, P: ProbVec, Q: ProbVec) -> np.ndarray:
    return (alpha * Q.array + P.array) / (alpha + 1.0)


def falpha_alpha_derivative(order: int, alpha: float, P: ProbVec, Q: ProbVec) -> float:
    """n-th partial derivative of D_{f_alpha}(P||Q) in alpha, through divergences of the mixture."""
    if order < 1:
        raise ParameterError(f"derivative order {order} must be at least 1")
    a = _check_alpha(alpha)
    if not Q.fully_supported:
        raise PreconditionError("Q must be fully supported")
    q = Q.array
    mix = _mixture(a, P, Q)
    if order == 1:
        return 2.0 * (a + 1.0) * divergence_value(kl(), mix, q)
    if order == 2:
        return -2.0 * divergence_value(kl(), q, mix)
    if order == 3:
        return 2.0 / (a + 1.0) * chi2_value(q, mix)
    n = order
    dn = renyi_value(float(n - 1), q, mix)
    sign = -1.0 if n % 2 == 0 else 1.0
    return sign * 2.0 * math.factorial(n - 3) / (a + 1.0) ** (n - 2) * math.expm1((n - 2) * dn)


def falpha_difference_bounds(alpha: float, beta: float, P: ProbVec, Q: ProbVec) -> DifferenceBounds:
    """Bounds on D_{f_alpha}(P||Q) - D_{f_beta}(P||Q) for alpha >= beta.

    ub_candidates holds (2(a - b) D(P||Q), (a - b)(a + b + 2) D(mix_b||Q)).
    """
    a = _check_alpha(alpha)
    b = _check_alpha(beta)
    if a < b:
        raise ParameterError(f"need alpha >= beta, got alpha={alpha!r}, beta={beta!r}")
    q = Q.array
    rel = divergence_value(kl(), P.array, q)
    lb = (a - b) * (a + b + 2.0) * divergence_value(kl(), _mixture(a, P, Q), q)
    via_kl = 2.0 * (a - b) * rel
    via_mix = (a - b) * (a + b + 2.0) * divergence_value(kl(), _mixture(b, P, Q), q)
    return DifferenceBounds(lb=lb, ub=min(via_kl, via_mix), ub_candidates=(via_kl, via_mix))


def _excess_ratio(v: float) -> float:
    """((1 + v)^2 ln(1 + v) - v) / v^2, with its series near v = 0."""
    if abs(v) < 1e-3:
        return 1.5 + v / 3.0 - v * v / 12.0 + v ** 3 / 30.0
    return ((1.0 + v) ** 2 * math.log1p(v) - v) / (v * v)


def kappa_alpha(alpha: float, xi2: float) -> float:
    """(f_alpha(xi2) + f_alpha'(1)(1 - xi2)) / (xi2 - 1)^2."""
    a = _check_alpha(alpha)
    if not xi2 > 1.0:
        raise ParameterError(f"xi2={xi2!r} must exceed 1")
    if math.isinf(xi2):
        return math.inf
    return math.log1p(a) + _excess_ratio((xi2 - 1.0) / (a + 1.0))


def contraction_denominator(alpha: float) -> float:
    """f_alpha(0) + f_alpha'(1) = ln(alpha + 1) + alpha + 1 - alpha^2 ln(1 + 1/alpha)."""
    a = _check_alpha(alpha)
    return math.log1p(a) + a + 1.0 - a * a * math.log1p(1.0 / a)


def contraction_ratio_upper(alpha: float, xi: float) -> float:
    """Upper bound on mu_{f_alpha} / mu_{chi^2} for an input law with min mass 1/xi."""
    if not xi >= 2.0:
        raise ParameterError(f"xi = 1/min Q = {xi!r} must be at least 2")
    return kappa_alpha(alpha, xi) / contraction_denominator(alpha)
