from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional

import numpy as np
from scipy.special import logsumexp, xlogy

from divlab.core.exceptions import DimensionMismatchError, DomainError, ParameterError
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator, catalog, chi2_pearson, dual_generator, kl
from divlab.core.models import Interval, JointPMF, ProbVec
from divlab.core.numerics import maximize_1d

logger = logging.getLogger(__name__)

__all__ = [
    "f_divergence", "divergence_value", "blocked_divergence_value", "named_divergence", "chi2_value",
    "renyi_divergence", "renyi_value", "alpha_renyi_convert", "entropy",
    "arimoto_conditional_entropy", "conditional_entropy", "binary_divergence",
    "binary_entropy", "dual_generator", "fenchel_conjugate",
]


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"P has shape {p.shape}, Q has shape {q.shape}")
    return p, q


def divergence_value(f: Generator, p, q) -> float:
    """D_f(P||Q) on raw mass arrays; returns math.inf when it diverges.

    Conventions: 0 f(0/0) = 0, Q(x) f(0) for P(x) = 0 < Q(x), and
    P(x) lim f(u)/u for Q(x) = 0 < P(x).
    """
    p, q = _pair(p, q)
    return max(_term_sum(f, p, q), 0.0)


def blocked_divergence_value(f: Generator, p, q, block_size: int = 1 << 16, workers: int = 1) -> float:
    """divergence_value over fixed-size index blocks, merged in block order.

    The partition depends only on block_size, so the result is the same for
    every worker count.
    """
    p, q = _pair(p, q)
    p, q = p.ravel(), q.ravel()
    starts = range(0, p.size, block_size)

    def part(s: int) -> float:
        return _term_sum(f, p[s:s + block_size], q[s:s + block_size])

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(part, starts))
    else:
        parts = [part(s) for s in starts]
    if any(math.isinf(v) for v in parts):
        return math.inf
    return max(math.fsum(parts), 0.0)


def _term_sum(f: Generator, p: np.ndarray, q: np.ndarray) -> float:
    qpos = q > 0.0
    both = qpos & (p > 0.0)
    total = 0.0
    if both.any():
        t = p[both] / q[both]
        total = float(np.sum(q[both] * f.eval(t)))
    p_zero = qpos & (p == 0.0)
    if p_zero.any():
        if f.f_at_zero.infinite:
            return math.inf
        total += f.f_at_zero.value * float(np.sum(q[p_zero]))
    q_zero = (~qpos) & (p > 0.0)
    if q_zero.any():
        if f.slope_at_infinity.infinite:
            return math.inf
        total += f.slope_at_infinity.value * float(np.sum(p[q_zero]))
    return total


def f_divergence(f: Generator, P: ProbVec, Q: ProbVec) -> ExtendedReal:
    if P.n != Q.n:
        raise DimensionMismatchError(f"P has {P.n} masses, Q has {Q.n}")
    return ExtendedReal.of(divergence_value(f, P.array, Q.array))


def named_divergence(kind: str, P: ProbVec, Q: ProbVec, param: Optional[float] = None) -> ExtendedReal:
    """Catalog divergence; `param` is alpha for 'alpha', gamma for 'e_gamma', omega for 'degroot'."""
    return f_divergence(catalog(kind, param), P, Q)


def chi2_value(p, q) -> float:
    return divergence_value(chi2_pearson(), p, q)


# ---------------------------------------------------------------- Renyi family

def _check_order(alpha: float) -> float:
    a = float(alpha)
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f"order alpha={alpha!r} must be positive and finite")
    return a


def renyi_value(alpha: float, p, q) -> float:
    a = _check_order(alpha)
    if a == 1.0:
        raise ParameterError("alpha = 1 is the relative entropy; use the 'kl' divergence")
    p, q = _pair(p, q)
    if a > 1.0 and np.any((q == 0.0) & (p > 0.0)):
        return math.inf
    both = (p > 0.0) & (q > 0.0)
    if not both.any():
        return math.inf
    with np.errstate(divide="ignore"):
        s = logsumexp(a * np.log(p[both]) + (1.0 - a) * np.log(q[both]))
    return max(float(s) / (a - 1.0), 0.0)


def renyi_divergence(alpha: float, P: ProbVec, Q: ProbVec) -> ExtendedReal:
    """D_alpha(P||Q) = log(sum P^a Q^(1-a)) / (a - 1), in nats."""
    if P.n != Q.n:
        raise DimensionMismatchError(f"P has {P.n} masses, Q has {Q.n}")
    return ExtendedReal.of(renyi_value(alpha, P.array, Q.array))


def alpha_renyi_convert(alpha: float, alpha_div: float) -> float:
    """Renyi divergence of order alpha from the Alpha divergence of the same order."""
    a = float(alpha)
    if a == 1.0:
        raise ParameterError("the conversion is singular at alpha = 1")
    z = a * (a - 1.0) * float(alpha_div)
    if not 1.0 + z > 0.0:
        raise DomainError(f"1 + alpha(alpha-1)D = {1.0 + z!r} must be positive")
    return math.log1p(z) / (a - 1.0)


EntropyKind = Literal["shannon", "renyi", "tsallis"]


def _shannon(p: np.ndarray) -> float:
    return float(-np.sum(xlogy(p, p)))


def entropy(kind: EntropyKind, P: ProbVec, alpha: Optional[float] = None) -> float:
    """Shannon, Renyi or Tsallis entropy in nats; order 1 gives Shannon."""
    p = P.array
    if kind == "shannon":
        return _shannon(p)
    if kind not in ("renyi", "tsallis"):
        raise ParameterError(f"unknown entropy kind {kind!r}. Expected: ['shannon', 'renyi', 'tsallis']")
    if alpha is None:
        raise ParameterError(f"{kind} entropy needs an order alpha")
    a = _check_order(alpha)
    if a == 1.0:
        return _shannon(p)
    pos = p[p > 0.0]
    if kind == "renyi":
        return float(logsumexp(a * np.log(pos))) / (1.0 - a)
    return (float(np.sum(pos ** a)) - 1.0) / (1.0 - a)


def conditional_entropy(joint: JointPMF) -> float:
    """H(X|Y) in nats."""
    pxy = joint.array
    py = pxy.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pxy > 0.0, pxy / py[None, :], 1.0)
    return float(-np.sum(xlogy(pxy, ratio)))


def arimoto_conditional_entropy(alpha: float, joint: JointPMF) -> float:
    """Arimoto-Renyi conditional entropy (a/(1-a)) log E[||P_{X|Y}||_a], nats."""
    a = _check_order(alpha)
    if a == 1.0:
        return conditional_entropy(joint)
    pxy = joint.array
    # P_Y(y) ||P_{X|Y}(.|y)||_a = ||P_XY(., y)||_a
    log_norms = []
    for col in pxy.T:
        pos = col[col > 0.0]
        if pos.size:
            log_norms.append(float(logsumexp(a * np.log(pos))) / a)
    return a / (1.0 - a) * float(logsumexp(log_norms))


def binary_entropy(p: float) -> float:
    return _shannon(np.array([p, 1.0 - p]))


def binary_divergence(kind: str, p: float, q: float, alpha: Optional[float] = None) -> ExtendedReal:
    """Binary relative entropy d(p||q) or binary Renyi divergence d_a(p||q)."""
    for name, v in (("p", p), ("q", q)):
        if not 0.0 <= v <= 1.0:
            raise ParameterError(f"{name}={v!r} must lie in [0, 1]")
    pa = np.array([p, 1.0 - p])
    qa = np.array([q, 1.0 - q])
    if kind == "kl":
        return ExtendedReal.of(divergence_value(kl(), pa, qa))
    if kind == "renyi":
        if alpha is None:
            raise ParameterError("binary Renyi divergence needs an order alpha")
        if float(alpha) == 1.0:
            return ExtendedReal.of(divergence_value(kl(), pa, qa))
        return ExtendedReal.of(renyi_value(alpha, pa, qa))
    raise ParameterError(f"unknown binary divergence {kind!r}. Expected: ['kl', 'renyi']")


# ---------------------------------------------------------------- conjugate

_LOG_T_RANGE = (-30.0, 30.0)
# exp overflows just past 709
_LOG_T_CAP = 700.0
_LOG_T_STEP = 60.0


def fenchel_conjugate(f: Generator, x: float, grid_points: int = 4096) -> ExtendedReal:
    """sup over t > 0 of t x - f(t).

    +inf when x exceeds lim f(u)/u. Otherwise a grid scan on log t with golden
    refinement, also counting the t -> 0 limit -f(0). When lim f(u)/u is infinite
    the window slides right while the maximiser sits on its upper edge; still
    climbing at t = e^700 counts as unbounded. With a finite slope t x - f(t)
    cancels at large t, so the window stays put.
    """
    x = float(x)
    slope = f.slope_at_infinity
    if slope.is_finite and x > slope.value:
        return ExtendedReal.inf()

    def objective(s):
        t = np.exp(s)
        with np.errstate(over="ignore", invalid="ignore"):
            v = t * x - f.eval(t)
        return np.where(np.isnan(v), -np.inf, v)

    kinks = [math.log(k) for k in f.kinks if k > 0]
    lo, hi = _LOG_T_RANGE
    res = maximize_1d(objective, Interval(lo=lo, hi=hi), grid_points=grid_points,
                      vectorized=True, extra_points=kinks)
    best = res.max
    while (not slope.is_finite and math.isfinite(best)
           and res.argmax >= hi - 2.0 * (hi - lo) / (grid_points - 1)):
        if hi >= _LOG_T_CAP:
            logger.debug("conjugate of %s at x=%r still increasing at log t=%g", f.name, x, hi)
            return ExtendedReal.inf()
        lo, hi = hi - 10.0, min(hi + _LOG_T_STEP, _LOG_T_CAP)
        res = maximize_1d(objective, Interval(lo=lo, hi=hi), grid_points=grid_points,
                          vectorized=True, extra_points=kinks)
        if not res.max > best + 1e-15 * (1.0 + abs(best)):
            break
        best = res.max
    if f.f_at_zero.is_finite:
        best = max(best, -f.f_at_zero.value)
    if not math.isfinite(best):
        return ExtendedReal.inf()
    return ExtendedReal(value=best)
