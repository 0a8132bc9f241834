"""Strong data-processing machinery: likelihood-ratio ranges, gap and ratio bounds."""
from __future__ import annotations
import logging
import math
from functools import reduce
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from divlab.core.exceptions import (
    DimensionMismatchError, GeneratorClassError, NumericalError, ParameterError, PreconditionError,
)
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator
from divlab.core.models import (
    Channel, ContractionBound, GapBounds, Interval, MixtureBounds, MixtureSetup, ProbVec, ProductGap,
    SdpiCoefficients, XiRange,
)
from divlab.core.numerics import gauss_legendre_nodes, maximize_1d, minimize_1d
from divlab.services.divergence import blocked_divergence_value, chi2_value, divergence_value

logger = logging.getLogger(__name__)

# One-sided limits at 0 and +inf are read off these sample points; anything larger
# than _LIMIT_BIG there is treated as divergent.
_ZERO_PROBE = 1e-100
_LIMIT_BIG = 1e50
_SCAN_FLOOR = 1e-12
_SCAN_CEIL = 1e12

MAX_STATES = 1 << 20
MAX_COORDINATES = 12


# ---------------------------------------------------------------- basics

def push_forward(P: ProbVec, W: Channel) -> ProbVec:
    """P W, the output law of W driven by P."""
    if P.n != W.M:
        raise DimensionMismatchError(f"P has {P.n} masses but the channel has {W.M} input rows")
    return ProbVec(masses=P.array @ W.array)


def xi_range(P: ProbVec, Q: ProbVec) -> XiRange:
    """Infimum and supremum of P/Q over the alphabet."""
    if P.n != Q.n:
        raise DimensionMismatchError(f"P has {P.n} masses, Q has {Q.n}")
    if not Q.fully_supported:
        raise PreconditionError("Q must be fully supported to bound the likelihood ratio P/Q")
    ratio = P.array / Q.array
    return XiRange(xi1=min(float(ratio.min()), 1.0), xi2=ExtendedReal.of(max(float(ratio.max()), 1.0)))


def binary_convolution(a: float, b: float) -> float:
    """a * b = a(1 - b) + (1 - a)b."""
    return a * (1.0 - b) + (1.0 - a) * b


def bernoulli_chi2(p: float, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ParameterError(f"q={q!r} must lie in (0, 1)")
    return (p - q) ** 2 / (q * (1.0 - q))


# ---------------------------------------------------------------- coefficients

def _edge_value(fn: Callable, t: float) -> float:
    if t == 0.0:
        v, limit = float(fn(_ZERO_PROBE)), True
    elif math.isinf(t):
        v, limit = float(fn(1.0 / _ZERO_PROBE)), True
    else:
        v, limit = float(fn(t)), False
    if math.isnan(v):
        raise NumericalError(f"second-derivative evaluation returned NaN at t={t!r}")
    if limit and v > _LIMIT_BIG:
        return math.inf
    return v


def _extremes(fn: Callable, monotonicity: str, lo: float, hi: float) -> Tuple[float, float]:
    """(inf, sup) of fn over [lo, hi] intersected with (0, inf)."""
    if lo == hi:
        v = _edge_value(fn, lo)
        return v, v
    if monotonicity == "increasing":
        return _edge_value(fn, lo), _edge_value(fn, hi)
    if monotonicity == "decreasing":
        return _edge_value(fn, hi), _edge_value(fn, lo)

    a = math.log(max(lo, _SCAN_FLOOR))
    b = math.log(min(hi, _SCAN_CEIL))
    edges = [_edge_value(fn, lo), _edge_value(fn, hi)]
    if a >= b:
        return min(edges), max(edges)

    def on_log(s):
        return np.asarray(fn(np.exp(s)), dtype=float)

    interval = Interval(lo=a, hi=b)
    top = maximize_1d(on_log, interval, vectorized=True)
    bottom = minimize_1d(on_log, interval, vectorized=True)
    logger.debug("grid extremes on [%g, %g]: inf=%r sup=%r", lo, hi, bottom.max, top.max)
    return min(bottom.max, *edges), max(top.max, *edges)


def _half(x: float) -> ExtendedReal:
    return ExtendedReal.of(0.5 * x).clamp_nonneg()


def sdpi_coefficients(f: Generator, xi: XiRange) -> SdpiCoefficients:
    """Half the inf and sup of f'' and of t^3 f'' over [xi1, xi2].

    Known monotonicity reads the extremes off the endpoints; otherwise a
    log-spaced scan with golden refinement is used. A kink of f inside the
    interval makes the upper coefficients infinite. A degenerate range
    {1} gives every coefficient as f''(1) / 2.
    """
    if xi.degenerate:
        h = _half(float(f.d2(1.0)))
        return SdpiCoefficients(c_f=h, e_f=h, c_dual=h, e_dual=h)
    lo, hi = xi.xi1, float(xi.xi2)
    d2_inf, d2_sup = _extremes(f.d2, f.d2_monotonicity, lo, hi)
    t3_inf, t3_sup = _extremes(f.t3d2, f.t3d2_monotonicity, lo, hi)
    if any(lo <= k <= hi for k in f.kinks):
        d2_sup = t3_sup = math.inf
    return SdpiCoefficients(
        c_f=_half(d2_inf), e_f=_half(d2_sup), c_dual=_half(t3_inf), e_dual=_half(t3_sup),
    )


def gap_bounds(f: Generator, P: ProbVec, Q: ProbVec, W: Channel) -> GapBounds:
    """Lower and upper bounds on D_f(P||Q) - D_f(PW||QW) through chi^2 gaps."""
    if not (P.fully_supported and Q.fully_supported):
        raise PreconditionError("P and Q must both be fully supported")
    xi = xi_range(P, Q)
    coeffs = sdpi_coefficients(f, xi)
    PW, QW = push_forward(P, W), push_forward(Q, W)
    p, q, pw, qw = P.array, Q.array, PW.array, QW.array
    primal = max(chi2_value(p, q) - chi2_value(pw, qw), 0.0)
    dual = max(chi2_value(q, p) - chi2_value(qw, pw), 0.0)
    exact = max(divergence_value(f, p, q) - divergence_value(f, pw, qw), 0.0)
    return GapBounds(
        lower_primal=coeffs.c_f * primal,
        lower_dual=coeffs.c_dual * dual,
        upper_primal=coeffs.e_f * primal,
        upper_dual=coeffs.e_dual * dual,
        exact_gap=ExtendedReal.of(exact),
    )


# ---------------------------------------------------------------- kappa

_NEAR_ONE = 1e-2


def kappa_objective(f: Generator) -> Callable[[np.ndarray], np.ndarray]:
    """(f(t) + f'(1)(1 - t)) / (t - 1)^2, continuous through t = 1.

    Near t = 1 the quotient is evaluated as the integral of (1 - s) f''(1 + s(t - 1))
    over s in [0, 1].
    """
    slope_one = float(f.d1(1.0))
    nodes, weights = gauss_legendre_nodes(20)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights * (1.0 - s)

    def r(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        near = np.abs(t - 1.0) < _NEAR_ONE
        if near.any():
            arg = 1.0 + np.outer(t[near] - 1.0, s)
            out[near] = np.asarray(f.d2(arg), dtype=float) @ w
        far = ~near
        if far.any():
            tf = t[far]
            ft = np.empty_like(tf)
            zero = tf == 0.0
            ft[zero] = f.f_at_zero.value
            if (~zero).any():
                ft[~zero] = f.eval(tf[~zero])
            out[far] = (ft + slope_one * (1.0 - tf)) / (tf - 1.0) ** 2
        return out

    return r


def kappa(f: Generator, xi: XiRange, grid_points: int = 4096) -> ExtendedReal:
    """sup over (xi1, 1) and (1, xi2) of (f(t) + f'(1)(1 - t)) / (t - 1)^2."""
    if f.f_at_zero.infinite:
        raise GeneratorClassError(f"{f.name}: kappa needs a finite f(0)")
    if 1.0 in f.kinks:
        raise GeneratorClassError(f"{f.name}: kappa needs f differentiable at 1")
    lo, hi = xi.xi1, xi.xi2
    if not (lo < 1.0 < hi):
        raise PreconditionError(f"kappa needs xi1 < 1 < xi2, got ({lo!r}, {hi})")
    r = kappa_objective(f)
    best = float(0.5 * f.d2(1.0))

    left = maximize_1d(r, Interval(lo=lo, hi=1.0, open_hi=True), grid_points=grid_points, vectorized=True)
    best = max(best, left.max)

    top = min(float(hi), _SCAN_CEIL)

    def on_log(u):
        return r(np.exp(u))

    right = maximize_1d(on_log, Interval(lo=0.0, hi=math.log(top), open_lo=True),
                        grid_points=grid_points, vectorized=True)
    best = max(best, right.max)
    if hi.infinite and right.argmax >= math.log(top) - 1e-9:
        edge = float(r(np.array([top]))[0])
        before = float(r(np.array([top / 10.0]))[0])
        if edge > before * (1.0 + 1e-9):
            logger.debug("kappa(%s): objective still increasing at t=%g; reporting +inf", f.name, top)
            return ExtendedReal.inf()
    if not math.isfinite(best):
        return ExtendedReal.inf()
    return ExtendedReal(value=best)


# ---------------------------------------------------------------- contraction ratio

_CLASS_GRID = np.logspace(-6, 6, 1024)


def check_contraction_class(f: Generator, rel_tol: float = 1e-9) -> None:
    """Raise unless f(0) is finite and g(t) = (f(t) - f(0)) / t is convex on a sampled grid.

    t^3 g''(t) = t^2 f''(t) - 2t f'(t) + 2(f(t) - f(0)) is checked against a
    tolerance relative to the size of its terms.
    """
    if f.f_at_zero.infinite:
        raise GeneratorClassError(f"generator outside the contraction class: {f.name} has f(0) = +inf")
    t = _CLASS_GRID
    f0 = f.f_at_zero.value
    a = t * t * np.asarray(f.d2(t), dtype=float)
    b = 2.0 * t * np.asarray(f.d1(t), dtype=float)
    c = 2.0 * (np.asarray(f.eval(t), dtype=float) - f0)
    h = a - b + c
    scale = np.abs(a) + np.abs(b) + np.abs(c)
    bad = h < -rel_tol * scale
    if bad.any():
        t_bad = float(t[np.argmax(bad)])
        raise GeneratorClassError(
            f"generator outside the contraction class: (f(t) - f(0))/t is not convex near t={t_bad:g} for {f.name}"
        )


def _contraction_denominator(f: Generator) -> float:
    den = f.f_at_zero.value + float(f.d1(1.0))
    if not den > 0.0:
        raise GeneratorClassError(f"{f.name}: f(0) + f'(1) = {den!r} must be positive")
    return den


def ratio_bound_thm3(f: Generator, P: ProbVec, Q: ProbVec, W: Channel) -> ContractionBound:
    """Upper bound on D_f(PW||QW) / D_f(P||Q) and on the contraction coefficient multiplier."""
    check_contraction_class(f)
    chi_in = chi2_value(P.array, Q.array)
    if not chi_in > 0.0:
        raise PreconditionError("the ratio bound needs P != Q")
    xi = xi_range(P, Q)
    den = _contraction_denominator(f)
    k = kappa(f, xi)
    chi_out = chi2_value(push_forward(P, W).array, push_forward(Q, W).array)
    ratio = chi_out / chi_in
    k_all = kappa(f, XiRange(xi1=0.0, xi2=ExtendedReal.of(1.0 / Q.p_min)))
    return ContractionBound(
        bound_on_ratio=k * (ratio / den),
        contraction_coeff_bound=k_all * (1.0 / den),
        kappa=k,
        chi2_ratio=ratio,
    )


# ---------------------------------------------------------------- mixtures

def bsc_mixture_setup(n: int, p: float, q: float, delta: float, lam: float) -> MixtureSetup:
    """n independent Bern(p) vs Bern(q) coordinates, each through BSC(delta)."""
    if n < 1:
        raise ParameterError(f"n={n} must be at least 1")
    return time_varying_bsc_setup([p] * n, [q] * n, [delta] * n, lam)


def time_varying_bsc_setup(
    ps: Sequence[float], qs: Sequence[float], deltas: Sequence[float], lam: float,
) -> MixtureSetup:
    if not (len(ps) == len(qs) == len(deltas)):
        raise DimensionMismatchError(
            f"need one (p, q, delta) per coordinate; got {len(ps)}, {len(qs)}, {len(deltas)}"
        )
    return MixtureSetup(
        sources_p=tuple(ProbVec.bernoulli(p) for p in ps),
        sources_q=tuple(ProbVec.bernoulli(q) for q in qs),
        channels=tuple(Channel.bsc(d) for d in deltas),
        lam=lam,
    )


def _coordinates(setup: MixtureSetup):
    for P, Q, W in zip(setup.sources_p, setup.sources_q, setup.channels):
        yield P.array, Q.array, W.array


def mixture_xi(setup: MixtureSetup) -> XiRange:
    """Likelihood-ratio range of the mixed product source against Q^n."""
    lam = setup.lam
    lo = hi = 1.0
    for p, q, _ in _coordinates(setup):
        ratio = p / q
        lo *= 1.0 - lam + lam * float(ratio.min())
        hi *= 1.0 - lam + lam * float(ratio.max())
    return XiRange(xi1=min(lo, 1.0), xi2=ExtendedReal.of(max(hi, 1.0)))


def _chi2_terms(setup: MixtureSetup) -> Tuple[np.ndarray, np.ndarray]:
    chi_x, chi_y = [], []
    for p, q, w in _coordinates(setup):
        chi_x.append(chi2_value(p, q))
        chi_y.append(chi2_value(p @ w, q @ w))
    return np.array(chi_x), np.array(chi_y)


def _log_products(setup: MixtureSetup) -> Tuple[float, float]:
    """sum log(1 + lam^2 chi2) over coordinates, inputs and outputs."""
    chi_x, chi_y = _chi2_terms(setup)
    lam2 = setup.lam ** 2
    return float(np.sum(np.log1p(lam2 * chi_x))), float(np.sum(np.log1p(lam2 * chi_y)))


def _product(vectors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(lambda a, b: np.multiply.outer(a, b).ravel(), vectors)


def mixture_divergences(
    setup: MixtureSetup,
    f: Generator,
    *,
    max_states: int = MAX_STATES,
    workers: int = 1,
) -> Optional[Tuple[float, float]]:
    """(D_f(R_X^n||Q_X^n), D_f(R_Y^n||Q_Y^n)) by enumeration, or None past the state cap."""
    if setup.n > MAX_COORDINATES:
        logger.warning("exact mixture divergences skipped: n=%d exceeds %d", setup.n, MAX_COORDINATES)
        return None
    states_x = math.prod(P.n for P in setup.sources_p)
    states_y = math.prod(W.K for W in setup.channels)
    if max(states_x, states_y) > max_states:
        logger.warning("exact mixture divergences skipped: %d states exceed the cap %d",
                       max(states_x, states_y), max_states)
        return None
    lam = setup.lam
    rx, qx, ry, qy = [], [], [], []
    for p, q, w in _coordinates(setup):
        r = lam * p + (1.0 - lam) * q
        rx.append(r)
        qx.append(q)
        ry.append(r @ w)
        qy.append(q @ w)
    d_in = blocked_divergence_value(f, _product(rx), _product(qx), workers=workers)
    d_out = blocked_divergence_value(f, _product(ry), _product(qy), workers=workers)
    logger.debug("mixture enumeration: %d input and %d output states", states_x, states_y)
    return d_in, d_out


def mixture_bounds_thm2(
    setup: MixtureSetup,
    f: Generator,
    *,
    max_states: int = MAX_STATES,
    workers: int = 1,
    exact: bool = True,
) -> MixtureBounds:
    """Bounds on D_f(R_X^n||Q_X^n) - D_f(R_Y^n||Q_Y^n) for mixed memoryless sources.

    The exact gap is included when the product alphabets are small enough to
    enumerate. Pass exact=False for bounds only.
    """
    xi = mixture_xi(setup)
    coeffs = sdpi_coefficients(f, xi)
    sx, sy = _log_products(setup)
    # prod(1 + a_i) - prod(1 + b_i) without cancellation
    product_gap = max(math.exp(sy) * math.expm1(sx - sy), 0.0)
    chi_x, chi_y = _chi2_terms(setup)
    linear_gap = max(setup.lam ** 2 * float(np.sum(chi_x - chi_y)), 0.0)

    gap = None
    divs = mixture_divergences(setup, f, max_states=max_states, workers=workers) if exact else None
    if divs is not None:
        gap = max(divs[0] - divs[1], 0.0)
    return MixtureBounds(
        lb1=coeffs.c_f * product_gap,
        lb2=coeffs.c_f * linear_gap,
        ub1=coeffs.e_f * product_gap,
        xi1_nl=xi.xi1,
        xi2_nl=float(xi.xi2),
        exact_gap=gap,
    )


def product_ratio_bound_thm4(setup: MixtureSetup, f: Generator) -> float:
    """Upper bound on D_f(R_Y^n||Q_Y^n) / D_f(R_X^n||Q_X^n) for lam in (0, 1]."""
    check_contraction_class(f)
    if not setup.lam > 0.0:
        raise PreconditionError("the product ratio bound needs lam > 0")
    sx, sy = _log_products(setup)
    den_x = math.expm1(sx)
    if not den_x > 0.0:
        raise PreconditionError("every coordinate has P = Q; the input divergence vanishes")
    den = _contraction_denominator(f)
    k = kappa(f, mixture_xi(setup))
    return float(k) / den * (math.expm1(sy) / den_x)


def product_gap_lemma1(a: Sequence[float], b: Sequence[float], u: float) -> ProductGap:
    """prod(1 + a_i u) - prod(1 + b_i u) and its linear lower bound sum (a_i - b_i) u."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"a has {a.size} entries, b has {b.size}")
    if u < 0.0 or np.any(b < 0.0) or np.any(a < b):
        raise ParameterError("need a_i >= b_i >= 0 and u >= 0")
    sa = float(np.sum(np.log1p(a * u)))
    sb = float(np.sum(np.log1p(b * u)))
    return ProductGap(exact=math.exp(sb) * math.expm1(sa - sb), linear_lb=float(np.sum(a - b)) * u)
