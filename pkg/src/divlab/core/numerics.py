"""Shared numerical kernels: Lambert W, 1-D maximization, quadrature, differences."""
from __future__ import annotations
import logging
import math
from functools import lru_cache
from typing import Callable, Literal, Sequence, Tuple

import numpy as np

from divlab.core.exceptions import DomainError, NumericalError, ParameterError
from divlab.core.models import Interval, OptResult

logger = logging.getLogger(__name__)

PHI = (1 + math.sqrt(5)) / 2
INV_E = math.exp(-1.0)

Branch = Literal["principal", "secondary"]


# ---------------------------------------------------------------- Lambert W

def _lambert_seed(branch: Branch, x: float) -> float:
    # Near -1/e: series in p = sqrt(2(ex + 1)); elsewhere logarithmic asymptotics.
    if x < -0.25:
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        s = -1.0 if branch == "secondary" else 1.0
        return -1.0 + s * p - p * p / 3.0 + s * 11.0 * p ** 3 / 72.0
    if branch == "secondary":
        lx = math.log(-x)
        return lx - math.log(-lx)
    if x < 3.0:
        return math.log1p(x)
    lx = math.log(x)
    return lx - math.log(lx)


def lambert_w(branch: Branch, x: float) -> float:
    """Real Lambert W, solving w * exp(w) = x.

    principal: x >= -1/e, returns w >= -1.
    secondary: -1/e <= x < 0, returns w <= -1.
    Seeds come from the branch-point series or logarithmic asymptotics and are
    polished with Halley's method.
    """
    x = float(x)
    if branch not in ("principal", "secondary"):
        raise ParameterError(f"unknown branch {branch!r}. Expected: ['principal', 'secondary']")
    if math.isnan(x) or x < -INV_E * (1.0 + 1e-15):
        raise DomainError(f"lambert_w({branch}) undefined at x={x!r}; need x >= -1/e")
    if branch == "secondary" and x >= 0.0:
        raise DomainError(f"secondary branch needs -1/e <= x < 0, got x={x!r}")
    if x <= -INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        raise DomainError("lambert_w is not evaluated at infinity")

    w = _lambert_seed(branch, x)
    for _ in range(100):
        c1 = math.exp(w)
        c2 = w * c1 - x
        w1 = w + 1.0 if w != -1.0 else 1.0
        dw = c2 / (c1 * w1 - (w + 2.0) * c2 / (2.0 * w1))
        w -= dw
        if abs(dw) < 0.7e-16 * (2.0 + abs(w)):
            break
    else:
        logger.debug("lambert_w(%s, %r) hit the iteration cap", branch, x)

    # Halley can step across w = -1 very close to the branch point.
    if branch == "principal" and w < -1.0:
        w = -1.0
    if branch == "secondary" and w > -1.0:
        w = -1.0
    return w


# ---------------------------------------------------------------- maximization

def golden_section_maximize(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
) -> Tuple[float, float, int]:
    """Golden-section search for a maximizer of f on [a, b].

    Returns (x, f(x), evaluations).
    """
    c = b - (b - a) / PHI
    d = a + (b - a) / PHI
    fc = f(c)
    fd = f(d)
    evals = 2
    while abs(b - a) > tol:
        if fc < fd:
            a = c
            c = d
            fc = fd
            d = a + (b - a) / PHI
            fd = f(d)
        else:
            b = d
            d = c
            fd = fc
            c = b - (b - a) / PHI
            fc = f(c)
        evals += 1
    x_opt = (a + b) / 2
    return x_opt, f(x_opt), evals + 1


def _grid(interval: Interval, grid_points: int) -> np.ndarray:
    lo, hi = interval.lo, interval.hi
    if lo == hi:
        return np.array([lo])
    if interval.open_lo or interval.open_hi:
        pts = np.linspace(lo, hi, grid_points + 2)
        start = 1 if interval.open_lo else 0
        stop = grid_points + 1 if interval.open_hi else grid_points + 2
        return pts[start:stop]
    return np.linspace(lo, hi, grid_points)


def _checked(x: float, v: float) -> float:
    if math.isnan(v):
        raise NumericalError(f"objective returned NaN at x={x!r}")
    return v


def maximize_1d(
    fn: Callable,
    interval: Interval,
    grid_points: int = 4096,
    refine_tol: float = 1e-10,
    *,
    vectorized: bool = False,
    extra_points: Sequence[float] = (),
) -> OptResult:
    """Grid scan followed by golden-section refinement around the best cell.

    Ties on the grid go to the lowest abscissa, and the refined point is only
    accepted when it strictly beats the best grid sample. `extra_points` are
    scanned alongside the grid (used for known kinks of the objective).
    """
    if grid_points < 2:
        raise ParameterError(f"grid_points={grid_points} must be at least 2")
    xs = _grid(interval, grid_points)
    if len(extra_points):
        lo, hi = interval.lo, interval.hi
        extra = [
            float(x) for x in extra_points
            if (lo < x < hi) or (x == lo and not interval.open_lo) or (x == hi and not interval.open_hi)
        ]
        xs = np.unique(np.concatenate([xs, np.asarray(extra, dtype=float)]))
    if vectorized:
        vals = np.asarray(fn(xs), dtype=float)
    else:
        vals = np.array([fn(float(x)) for x in xs], dtype=float)
    nan = np.isnan(vals)
    if nan.any():
        raise NumericalError(f"objective returned NaN at x={float(xs[np.argmax(nan)])!r}")
    evals = len(xs)
    k = int(np.argmax(vals))
    best_x, best_v = float(xs[k]), float(vals[k])
    if len(xs) == 1 or not math.isfinite(best_v):
        return OptResult(argmax=best_x, max=best_v, evaluations=evals)

    a = float(xs[max(k - 1, 0)])
    b = float(xs[min(k + 1, len(xs) - 1)])
    # Open ends stay excluded from the refinement bracket.
    if interval.open_lo and a <= interval.lo:
        a = interval.lo + 0.5 * (float(xs[0]) - interval.lo)
    if interval.open_hi and b >= interval.hi:
        b = interval.hi - 0.5 * (interval.hi - float(xs[-1]))

    if vectorized:
        def scalar(x: float) -> float:
            return _checked(x, float(np.asarray(fn(np.array([x])), dtype=float)[0]))
    else:
        def scalar(x: float) -> float:
            return _checked(x, float(fn(x)))

    x_ref, v_ref, n_ref = golden_section_maximize(scalar, a, b, refine_tol)
    evals += n_ref
    if v_ref > best_v:
        best_x, best_v = x_ref, v_ref
    logger.debug("maximize_1d on [%g, %g]: argmax=%r max=%r (%d evals)",
                 interval.lo, interval.hi, best_x, best_v, evals)
    return OptResult(argmax=best_x, max=best_v, evaluations=evals)


def minimize_1d(fn: Callable, interval: Interval, **kwargs) -> OptResult:
    """Minimizer via maximize_1d of -fn; OptResult.max holds the minimum value."""
    vectorized = kwargs.get("vectorized", False)

    def neg(x):
        return -np.asarray(fn(x), dtype=float) if vectorized else -fn(x)

    res = maximize_1d(neg, interval, **kwargs)
    return OptResult(argmax=res.argmax, max=-res.max, evaluations=res.evaluations)


# ---------------------------------------------------------------- quadrature

@lru_cache(maxsize=8)
def gauss_legendre_nodes(n_nodes: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]; exact for degree 2n-1."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _gl(fn: Callable, a: float, b: float, n_nodes: int) -> float:
    nodes, weights = gauss_legendre_nodes(n_nodes)
    x = 0.5 * (b - a) * nodes + 0.5 * (b + a)
    fx = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = float(x[np.argmax(~np.isfinite(fx))])
        raise NumericalError(f"integrand is not finite at x={bad!r}")
    return 0.5 * (b - a) * float(np.dot(weights, fx))


def integrate(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Sequence[float] = (),
    tol: float = 1e-9,
    *,
    n_nodes: int = 20,
    max_depth: int = 40,
) -> float:
    """Composite Gauss-Legendre integral of a vectorized fn over [a, b].

    The range is first split at the breakpoints inside (a, b); each piece is
    bisected adaptively until halves agree with the whole to within a share of
    tol proportional to the piece length.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise ParameterError(f"integrate needs a < b, got a={a!r}, b={b!r}")
    cuts = sorted({float(c) for c in breakpoints if a < c < b})
    edges = [a, *cuts, b]
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        total += _adaptive(fn, lo, hi, _gl(fn, lo, hi, n_nodes), tol * (hi - lo) / (b - a),
                           n_nodes, max_depth)
    return total


def _adaptive(fn, a, b, whole, tol, n_nodes, depth):
    m = 0.5 * (a + b)
    left = _gl(fn, a, m, n_nodes)
    right = _gl(fn, m, b, n_nodes)
    if abs(left + right - whole) <= max(tol, 1e-15 * abs(whole)) or depth <= 0:
        if depth <= 0:
            logger.debug("integrate: depth limit on [%r, %r]", a, b)
        return left + right
    return (_adaptive(fn, a, m, left, 0.5 * tol, n_nodes, depth - 1)
            + _adaptive(fn, m, b, right, 0.5 * tol, n_nodes, depth - 1))


# ---------------------------------------------------------------- differences

def central_difference(fn: Callable[[np.ndarray], np.ndarray], t, order: int = 1) -> np.ndarray:
    """First or second central difference with h = 1e-6 * max(1, t) (1e-4 for order 2)."""
    t = np.asarray(t, dtype=float)
    scale = np.maximum(1.0, np.abs(t))
    if order == 1:
        h = 1e-6 * scale
        h = np.minimum(h, 0.5 * t) if np.all(t > 0) else h
        return (np.asarray(fn(t + h)) - np.asarray(fn(t - h))) / (2.0 * h)
    if order == 2:
        h = 1e-4 * scale
        h = np.minimum(h, 0.5 * t) if np.all(t > 0) else h
        return (np.asarray(fn(t + h)) - 2.0 * np.asarray(fn(t)) + np.asarray(fn(t - h))) / (h * h)
    raise ParameterError(f"difference order {order} not supported. Expected: [1, 2]")
