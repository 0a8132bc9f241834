"""Majorization, the rho-constrained simplex P_n(rho) and maxima of D_f(Q||U_n) over it."""
from __future__ import annotations
import logging
import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from divlab.core.exceptions import NumericalError, ParameterError, PreconditionError
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator, alpha_generator, dual_generator
from divlab.core.models import (
    CurvatureExtras, FiniteNBounds, GapTriple, Interval, MajorizationReport, Optimum, PhiBounds, ProbVec,
    QBeta, RhoSimplexParams, RhoThresholds, TsallisGap, VariationalCheck, XiRange,
)
from divlab.core.numerics import lambert_w, maximize_1d
from divlab.services.divergence import divergence_value, entropy, fenchel_conjugate
from divlab.services.f_alpha import falpha_generator
from divlab.services.sdpi import sdpi_coefficients

logger = logging.getLogger(__name__)

MAJORIZATION_TOL = 1e-12
BETA_GRID = 2048
_EXTENSION_EPS = 1e-9


# ---------------------------------------------------------------- majorization

def _padded(P: ProbVec, Q: ProbVec) -> Tuple[np.ndarray, np.ndarray]:
    n = max(P.n, Q.n)
    p = np.zeros(n)
    q = np.zeros(n)
    p[:P.n] = P.array
    q[:Q.n] = Q.array
    return p, q


def majorizes(P: ProbVec, Q: ProbVec) -> MajorizationReport:
    """Whether P is majorized by Q: every descending partial sum of Q dominates P's.

    Shorter vectors are padded with zeros. `gaps[k-1]` is G_Q(k) - G_P(k) and
    `first_violated_k` is 1-based.
    """
    p, q = _padded(P, Q)
    gaps = np.cumsum(np.sort(q)[::-1]) - np.cumsum(np.sort(p)[::-1])
    bad = gaps < -MAJORIZATION_TOL
    first = int(np.argmax(bad)) + 1 if bad.any() else None
    return MajorizationReport(holds=first is None, first_violated_k=first, gaps=tuple(float(g) for g in gaps))


def _require_majorized(P: ProbVec, Q: ProbVec) -> Tuple[np.ndarray, np.ndarray]:
    report = majorizes(P, Q)
    if not report.holds:
        k = report.first_violated_k
        raise PreconditionError(
            f"P is not majorized by Q: partial sum {k} of Q falls short by {-report.gaps[k - 1]:.3g}"
        )
    return _padded(P, Q)


def doubly_stochastic_mix(Q: ProbVec, weights: Sequence[float], permutations: Sequence[Sequence[int]]) -> ProbVec:
    """Q pushed through a convex combination of permutation matrices; the result is majorized by Q."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) != len(permutations) or len(w) == 0:
        raise ParameterError(f"need one weight per permutation, got {len(w)} and {len(permutations)}")
    if np.any(w < 0.0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ParameterError("mixing weights must be non-negative and sum to 1")
    q = Q.array
    out = np.zeros_like(q)
    for wj, perm in zip(w, permutations):
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(Q.n)):
            raise ParameterError(f"{perm.tolist()} is not a permutation of 0..{Q.n - 1}")
        out += wj * q[perm]
    return ProbVec(masses=out / out.sum())


def random_majorized(Q: ProbVec, rng: np.random.Generator, terms: int = 4) -> ProbVec:
    w = rng.dirichlet(np.ones(terms))
    perms = [rng.permutation(Q.n) for _ in range(terms)]
    return doubly_stochastic_mix(Q, w, perms)


def random_member(params: RhoSimplexParams, rng: np.random.Generator) -> ProbVec:
    """A random pmf in P_n(rho): uniform draws on [1, rho], normalized."""
    u = rng.uniform(1.0, params.rho, size=params.n)
    return ProbVec(masses=u / u.sum())


# ---------------------------------------------------------------- gaps from uniform

def _uniform_divergence(f: Generator, q: np.ndarray) -> float:
    return divergence_value(f, q, np.full(q.size, 1.0 / q.size))


def thm6_gap_bounds(f: Generator, P: ProbVec, Q: ProbVec) -> GapTriple:
    """Bounds on D_f(Q||U_n) - D_f(P||U_n) for P majorized by Q.

    lb = n c_f(n q_min, n q_max) (||Q||^2 - ||P||^2) and ub likewise with e_f.
    """
    p, q = _require_majorized(P, Q)
    n = q.size
    qpos = q[q > 0.0]
    xi = XiRange(xi1=min(n * float(qpos.min()), 1.0), xi2=ExtendedReal.of(max(n * float(qpos.max()), 1.0)))
    coeffs = sdpi_coefficients(f, xi)
    norm_gap = max(float(np.dot(q, q) - np.dot(p, p)), 0.0)
    exact = _uniform_divergence(f, q) - _uniform_divergence(f, p)
    return GapTriple(
        lb=(coeffs.c_f * (n * norm_gap)).clamp_nonneg(),
        exact=exact,
        ub=(coeffs.e_f * (n * norm_gap)).clamp_nonneg(),
    )


def norm_gap_bound(P: ProbVec, Q: ProbVec, rho: float) -> float:
    """(rho - 1)^2 / (4 rho n), an upper bound on ||Q||^2 - ||P||^2 when P < Q and Q is in P_n(rho)."""
    p, q = _require_majorized(P, Q)
    n = q.size
    if not rho >= 1.0:
        raise ParameterError(f"rho={rho!r} must be at least 1")
    if np.any(q <= 0.0) or q.max() > rho * q.min() * (1.0 + 1e-12):
        raise PreconditionError(f"Q is not in P_{n}({rho:g}): max/min mass ratio exceeds rho")
    bound = (rho - 1.0) ** 2 / (4.0 * rho * n)
    gap = float(np.dot(q, q) - np.dot(p, p))
    if gap < -1e-12 or gap > bound + 1e-12:
        raise NumericalError(f"norm gap {gap!r} outside [0, {bound!r}]")
    return bound


def tsallis_gap_bounds(alpha: float, P: ProbVec, Q: ProbVec) -> TsallisGap:
    """Bounds L <= S_a(P) - S_a(Q) <= U for P majorized by Q; L = U at a = 2."""
    a = float(alpha)
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f"Tsallis order alpha={alpha!r} must be positive")
    p, q = _require_majorized(P, Q)
    qpos = q[q > 0.0]
    q_min, q_max = float(qpos.min()), float(qpos.max())
    norm_gap = max(float(np.dot(q, q) - np.dot(p, p)), 0.0)
    small, large = (q_max, q_min) if a <= 2.0 else (q_min, q_max)
    L = 0.5 * a * small ** (a - 2.0) * norm_gap
    U = 0.5 * a * large ** (a - 2.0) * norm_gap
    exact = entropy("tsallis", ProbVec(masses=p), a) - entropy("tsallis", ProbVec(masses=q), a)
    return TsallisGap(L=L, U=U, exact=exact)


def tsallis_binary_family(beta: float, eps: float) -> Tuple[ProbVec, ProbVec]:
    """P_eps = (1/2 + eps, 1/2 - eps) and Q_eps = (1/2 + beta eps, 1/2 - beta eps), with P_eps < Q_eps."""
    if not beta > 1.0:
        raise ParameterError(f"beta={beta!r} must exceed 1")
    if not 0.0 < eps < 0.5 / beta:
        raise ParameterError(f"eps={eps!r} must lie in (0, 1/(2 beta)) = (0, {0.5 / beta:g})")
    return (ProbVec(masses=(0.5 + eps, 0.5 - eps)),
            ProbVec(masses=(0.5 + beta * eps, 0.5 - beta * eps)))


# ---------------------------------------------------------------- Q_beta and u_f / v_f

def _i_beta(n: int, rho: float, beta):
    raw = (1.0 - n * beta) / ((rho - 1.0) * beta)
    return np.clip(np.floor(raw + 1e-9), 0, n - 1).astype(int)


def q_beta(params: RhoSimplexParams, beta: float) -> QBeta:
    """The extremal pmf: i_beta masses rho*beta, one remainder mass, and beta elsewhere."""
    n, rho = params.n, params.rho
    lo, hi = params.gamma_interval
    if not lo * (1.0 - 1e-12) <= beta <= hi * (1.0 + 1e-12):
        raise ParameterError(f"beta={beta!r} outside Gamma_n(rho). Expected: [{lo!r}, {hi!r}]")
    if rho == 1.0:
        return QBeta(params=params, beta=beta, i_beta=0, masses=ProbVec.uniform(n))
    i = int(_i_beta(n, rho, beta))
    mid = 1.0 - (n + i * (rho - 1.0) - 1.0) * beta
    mid = min(max(mid, beta), rho * beta)
    masses = np.full(n, beta)
    masses[:i] = rho * beta
    masses[i] = mid
    return QBeta(params=params, beta=beta, i_beta=i, masses=ProbVec(masses=masses / masses.sum()))


def _beta_objective(f: Generator, n: int, rho: float) -> Callable[[np.ndarray], np.ndarray]:
    """beta -> D_f(Q_beta || U_n), vectorized."""

    def objective(beta):
        beta = np.asarray(beta, dtype=float)
        i = _i_beta(n, rho, beta)
        mid = np.clip(1.0 - (n + i * (rho - 1.0) - 1.0) * beta, beta, rho * beta)
        return (i * f.eval(n * rho * beta) + f.eval(n * mid) + (n - i - 1) * f.eval(n * beta)) / n

    return objective


def beta_breakpoints(params: RhoSimplexParams) -> np.ndarray:
    """The betas 1/(n + k(rho - 1)), k = 0..n-1, where i_beta changes."""
    k = np.arange(params.n)
    return 1.0 / (params.n + k * (params.rho - 1.0))


def u_f(params: RhoSimplexParams, f: Generator, grid_points: int = BETA_GRID) -> Optimum:
    """max over P_n(rho) of D_f(Q||U_n), through a scan of Q_beta over Gamma_n(rho)."""
    lo, hi = params.gamma_interval
    if params.rho == 1.0:
        return Optimum(value=0.0, beta_star=hi)
    res = maximize_1d(_beta_objective(f, params.n, params.rho), Interval(lo=lo, hi=hi),
                      grid_points=grid_points, vectorized=True, extra_points=beta_breakpoints(params))
    return Optimum(value=max(res.max, 0.0), beta_star=res.argmax)


def v_f(params: RhoSimplexParams, f: Generator, grid_points: int = BETA_GRID) -> Optimum:
    """max over P_n(rho) of D_f(U_n||Q), which is u_{f*}(n, rho)."""
    return u_f(params, dual_generator(f), grid_points=grid_points)


def alpha_from_uniform_max(alpha: float, n: int, rho: float) -> float:
    """max over P_n(rho) of the order-alpha Alpha divergence D(U_n||Q); tends to Delta(alpha, rho)."""
    return v_f(RhoSimplexParams(n=n, rho=rho), alpha_generator(alpha)).value


# ---------------------------------------------------------------- n -> infinity

def g_f_rho(f: Generator, rho: float, x):
    """x f(rho / (1 + (rho-1)x)) + (1 - x) f(1 / (1 + (rho-1)x)) on [0, 1]."""
    if not rho >= 1.0:
        raise ParameterError(f"rho={rho!r} must be at least 1")
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise ParameterError("x must lie in [0, 1]")
    s = 1.0 + (rho - 1.0) * xs
    out = xs * f.eval(rho / s) + (1.0 - xs) * f.eval(1.0 / s)
    return float(out) if np.ndim(x) == 0 else out


def d_f_asymptotic(f: Generator, rho: float, grid_points: int = 4096) -> float:
    """lim_n max over P_n(rho) of D_f(Q||U_n), the max of g_f over [0, 1]."""
    if not rho >= 1.0:
        raise ParameterError(f"rho={rho!r} must be at least 1")
    if rho == 1.0:
        return 0.0
    res = maximize_1d(lambda x: g_f_rho(f, rho, x), Interval(lo=0.0, hi=1.0),
                      grid_points=grid_points, vectorized=True)
    return max(res.max, 0.0)


def finite_n_bounds(f: Generator, n: int, rho: float) -> FiniteNBounds:
    """max of g_f over {m/n} <= u_f(n, rho) <= max of g_f over [0, 1]."""
    if n < 2:
        raise ParameterError(f"n={n} must be at least 2")
    lb = float(np.max(g_f_rho(f, rho, np.arange(n + 1) / n)))
    return FiniteNBounds(lb=max(lb, 0.0), ub=d_f_asymptotic(f, rho))


def tv_asymptotic(rho: float) -> Tuple[float, float]:
    """(value, maximizer) of the total-variation limit: 2(sqrt(rho)-1)/(sqrt(rho)+1) at 1/(1+sqrt(rho))."""
    r = math.sqrt(rho)
    return 2.0 * (r - 1.0) / (r + 1.0), 1.0 / (1.0 + r)


def chi2_asymptotic(rho: float) -> float:
    return (rho - 1.0) ** 2 / (4.0 * rho)


def hellinger_asymptotic(rho: float) -> float:
    return (rho ** 0.25 - 1.0) ** 2 / (math.sqrt(rho) + 1.0)


def kl_asymptotic(rho: float) -> float:
    return delta_alpha(1.0, rho)


# ---------------------------------------------------------------- Alpha divergences

def delta_alpha(alpha: float, rho: float) -> float:
    """Limit of the max over P_n(rho) of the order-alpha Alpha divergence from U_n.

    Continuous extension at alpha in {0, 1}: rho ln(rho)/(rho-1) - ln(e rho ln(rho)/(rho-1)).
    """
    a, rho = float(alpha), float(rho)
    if not (math.isfinite(rho) and rho > 1.0):
        raise ParameterError(f"rho={rho!r} must exceed 1")
    if abs(a) < _EXTENSION_EPS or abs(a - 1.0) < _EXTENSION_EPS:
        r = rho * math.log(rho) / (rho - 1.0)
        return r - 1.0 - math.log(r)
    ra = rho ** a
    log_t = (a * math.log((ra - 1.0) / a) + (1.0 - a) * math.log((rho - ra) / (1.0 - a))
             - math.log(rho - 1.0))
    return math.expm1(log_t) / (a * (a - 1.0))


def kl_rho_max(d: float) -> RhoThresholds:
    """Largest rho with lim_n max D(Q||U_n) <= d nats, and the simpler sufficient 1 + sqrt(8d)."""
    if not d > 0.0:
        raise ParameterError(f"d={d!r} must be positive")
    z = -math.exp(-d - 1.0)
    exact = lambert_w("secondary", z) / lambert_w("principal", z)
    return RhoThresholds(exact=exact, simple=1.0 + math.sqrt(8.0 * d))


def kl_d_for_rho(rho: float) -> RhoThresholds:
    """Inverse direction: the d reached at rho, exact Delta(1, rho) and the looser (rho-1)^2/8."""
    return RhoThresholds(exact=delta_alpha(1.0, rho), simple=(rho - 1.0) ** 2 / 8.0)


# ---------------------------------------------------------------- f_alpha divergences

def phi_alpha(alpha: float, rho: float) -> float:
    """Limit of the max over P_n(rho) of D_{f_alpha}(Q||U_n)."""
    return d_f_asymptotic(falpha_generator(alpha), rho)


def _phi_ab(alpha: float) -> Tuple[float, float]:
    a = 4.0 / (81.0 * (alpha + 1.0))
    b = 0.25 * math.log1p(alpha) + 0.375
    return a, b


def phi_upper_bounds(alpha: float, rho: float) -> PhiBounds:
    falpha_generator(alpha)
    if not rho >= 1.0:
        raise ParameterError(f"rho={rho!r} must be at least 1")
    chi = chi2_asymptotic(rho)
    cubic = (rho - 1.0) * (2.0 * rho + 1.0) * (rho + 2.0) / (rho * (rho + 1.0))
    ub1 = (math.log1p(alpha) + 1.5 - 1.0 / (alpha + 1.0)) * chi + cubic ** 2 / (81.0 * (alpha + 1.0))
    ub2 = (math.log(alpha + rho) + 1.5) * chi
    a, b = _phi_ab(alpha)
    r = rho - 1.0
    ub3 = a * r * r + b * min(r, r * r)
    return PhiBounds(ub1=ub1, ub2=ub2, ub3=ub3)


def phi_rho_max(alpha: float, d: float) -> float:
    """rho up to which the loosened bound keeps every D_{f_alpha}(Q||U_n) <= d nats."""
    falpha_generator(alpha)
    if not d > 0.0:
        raise ParameterError(f"d={d!r} must be positive")
    a, b = _phi_ab(alpha)
    rho1 = 1.0 + (math.sqrt(b * b + 4.0 * a * d) - b) / (2.0 * a)
    rho2 = 1.0 + math.sqrt(d / (a + b))
    return max(rho1, rho2)


# ---------------------------------------------------------------- rates and local bounds

_D2_GRID = 1025
_SLOPE_PROBES = (1e-100, 1e-200)


def _d2_range(f: Generator, rho: float) -> Tuple[float, ExtendedReal]:
    if rho == 1.0:
        t = np.array([1.0])
    else:
        t = np.logspace(-math.log10(rho), math.log10(rho), _D2_GRID)
    d2 = np.asarray(f.d2(t), dtype=float)
    m = max(float(np.min(d2)), 0.0)
    if any(1.0 / rho <= k <= rho for k in f.kinks) or not np.all(np.isfinite(d2)):
        return m, ExtendedReal.inf()
    return m, ExtendedReal.of(float(np.max(d2)))


def _slope_sup(f: Generator, n: int) -> ExtendedReal:
    """sup of |f'| over (0, n); f' is monotone so only the ends matter."""
    near, nearer = (float(f.d1(t)) for t in _SLOPE_PROBES)
    if not (math.isfinite(near) and math.isfinite(nearer)):
        return ExtendedReal.inf()
    if abs(nearer - near) > 1e-6 * max(1.0, abs(near)):
        return ExtendedReal.inf()
    return ExtendedReal.of(max(abs(near), abs(float(f.d1(float(n))))))


def _g_slope_sup(f: Generator, rho: float, points: int = 4097) -> float:
    x = np.linspace(0.0, 1.0, points)
    g = g_f_rho(f, rho, x)
    k = float(np.max(np.abs(np.diff(g)) / np.diff(x)))
    if not math.isfinite(k):
        raise NumericalError(f"slope of g_f on [0, 1] is not finite for rho={rho!r}; supply k_f")
    return k


def _scaled(coef: Union[float, ExtendedReal], x: float) -> ExtendedReal:
    return ExtendedReal.of(0.0) if x <= 0.0 else ExtendedReal.of(coef) * x


def rho_budget(M: float, d: float) -> float:
    """Largest rho with M (rho-1)^2 / (8 rho) <= d."""
    if not (math.isfinite(M) and M > 0.0):
        raise ParameterError(f"rho budget needs a finite bound M > 0 on f'', got {M!r}")
    if not d > 0.0:
        raise ParameterError(f"d={d!r} must be positive")
    c = d / M
    return 1.0 + 4.0 * c + math.sqrt(8.0 * c + 16.0 * c * c)


def thm7_extras(
    f: Generator,
    n: int,
    rho: float,
    Q: Optional[ProbVec] = None,
    *,
    k_f: Optional[float] = None,
    m: Optional[float] = None,
    M: Optional[float] = None,
    d: Optional[float] = None,
) -> CurvatureExtras:
    """Convergence rates of u_f(n, rho) and the local bounds from m <= f'' <= M on [1/rho, rho].

    Q defaults to the maximizing Q_beta. k_f, m and M default to grid estimates;
    an estimated k_f is flagged in the result.
    """
    params = RhoSimplexParams(n=n, rho=rho)
    estimated = k_f is None
    if estimated:
        k_f = _g_slope_sup(f, rho)
        logger.warning("K_f(%g) for %s estimated on a grid: %.6g", rho, f.name, k_f)
    if Q is None:
        Q = q_beta(params, u_f(params, f).beta_star).masses
    if not params.contains(Q):
        raise PreconditionError(f"Q is not in P_{n}({rho:g})")
    m_est, M_est = _d2_range(f, rho)
    m_val = m_est if m is None else float(m)
    M_val = M_est if M is None else ExtendedReal.of(M)

    rho_inf = f.f_at_zero * (1.0 - 1.0 / n) + float(f.eval(float(n))) / n
    k_n = _slope_sup(f, n)
    conv_rho = k_n * (2.0 * (n - 1) / (n + rho - 1.0))

    q = Q.array
    excess = n * float(np.dot(q, q)) - 1.0
    budget = None
    if d is not None:
        budget = rho_budget(float(M_val), d)
    return CurvatureExtras(
        conv_rate_n=k_f / n,
        k_f_estimated=estimated,
        rho_inf_limit=rho_inf,
        conv_rate_rho=conv_rho,
        m_lower=0.5 * m_val * max(excess, 0.0),
        divergence=_uniform_divergence(f, q),
        m_upper=_scaled(M_val, 0.5 * excess),
        m_upper_simplex=_scaled(M_val, (rho - 1.0) ** 2 / (8.0 * rho)),
        rho_budget=budget,
    )


# ---------------------------------------------------------------- conjugate duality

def _values_on_atoms(g: Union[Sequence[float], Callable[[int], float]], n: int) -> np.ndarray:
    if callable(g):
        vals = np.array([float(g(i)) for i in range(1, n + 1)])
    else:
        vals = np.asarray(g, dtype=float)
    if vals.shape != (n,):
        raise ParameterError(f"g needs {n} values, got shape {vals.shape}")
    return vals


def variational_check(
    f: Generator,
    n: int,
    rho: float,
    g: Union[Sequence[float], Callable[[int], float]],
    P: ProbVec,
    eps: float = 1e-3,
) -> VariationalCheck:
    """E_P[g] <= u_f(n, rho) + mean of the conjugate of f at g(1..n).

    Also builds g_eps from subgradients of f at t_i = n Q_{beta*}(i) and
    reports how far it falls short of equality (should be <= eps).
    """
    params = RhoSimplexParams(n=n, rho=rho)
    if not params.contains(P):
        raise PreconditionError(f"P is not in P_{n}({rho:g})")
    vals = _values_on_atoms(g, n)
    opt = u_f(params, f)
    lhs = float(np.dot(P.array, vals))
    conj = [fenchel_conjugate(f, v) for v in vals]
    if any(c.infinite for c in conj):
        logger.debug("conjugate is infinite at some g(i); the inequality is vacuous")
        rhs = ExtendedReal.inf()
    else:
        rhs = ExtendedReal.of(opt.value + math.fsum(float(c) for c in conj) / n)

    q_star = q_beta(params, opt.beta_star).masses.array
    slopes = np.asarray(f.d1(n * q_star), dtype=float)
    conj_star = [fenchel_conjugate(f, s) for s in slopes]
    achieving = None
    if all(c.is_finite for c in conj_star):
        achieving = opt.value + math.fsum(float(c) for c in conj_star) / n - float(np.dot(q_star, slopes))
        if achieving > eps:
            logger.warning("subgradient witness misses equality by %.3g > eps=%g", achieving, eps)
    return VariationalCheck(lhs=lhs, rhs=rhs, holds=bool(rhs.infinite or lhs <= float(rhs) + 1e-9),
                            achieving_gap=achieving)
