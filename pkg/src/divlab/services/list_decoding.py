"""List decoders on finite joints and lower bounds on their error probability."""
from __future__ import annotations
import logging
import math
from typing import Callable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import xlogy

from divlab.core.exceptions import DimensionMismatchError, ParameterError
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator
from divlab.core.models import (
    AhlswedeKornerBounds, ErrorProbReport, GeneralizedFano, JointPMF, ListDecoder, VariableListBound,
)
from divlab.services.divergence import (
    arimoto_conditional_entropy, binary_entropy, conditional_entropy, divergence_value,
)

logger = logging.getLogger(__name__)

FanoVariant = Literal["kl", "renyi", "refined_a", "refined_b"]
FANO_VARIANTS = ("kl", "renyi", "refined_a", "refined_b")

SCAN_STEP = 1e-6
_BISECTIONS = 60
_EQUALITY_TOL = 1e-12


# ---------------------------------------------------------------- built-in joints

def example1_joint() -> JointPMF:
    """9 x 2 joint whose top-L decoders err with probability 2^-L."""
    col0 = [128, 64, 32, 16, 8, 4, 2, 1, 1]
    col1 = [2, 2, 2, 2, 8, 16, 32, 64, 128]
    return JointPMF(matrix=np.column_stack([col0, col1]) / 512.0)


def example2_joint() -> JointPMF:
    col0 = [1 / 8, 1 / 8, 1 / 8, 1 / 16, 1 / 16]
    col1 = [1 / 24, 1 / 24, 1 / 24, 3 / 16, 3 / 16]
    return JointPMF(matrix=np.column_stack([col0, col1]))


def example2_decoder() -> ListDecoder:
    return ListDecoder(lists=((0, 1, 2), (3, 4)), alphabet_size=5)


def product_joint(a: JointPMF, b: JointPMF) -> JointPMF:
    """Joint of (X1, X2) and (Y1, Y2) for independent pairs; x = x1 * M2 + x2, y likewise."""
    return JointPMF(matrix=np.kron(a.array, b.array))


# ---------------------------------------------------------------- decoders

def top_l_decoder(joint: JointPMF, L: Union[int, Sequence[int]]) -> ListDecoder:
    """Per y, the |L(y)| most probable x given y; ties go to the smaller index."""
    M, K = joint.M, joint.K
    fixed = isinstance(L, (int, np.integer))
    sizes = [int(L)] * K if fixed else [int(s) for s in L]
    if len(sizes) != K:
        raise DimensionMismatchError(f"got {len(sizes)} list sizes for {K} outputs")
    for y, s in enumerate(sizes):
        if not 1 <= s < M:
            raise ParameterError(f"list size {s} for y={y} out of range. Expected: [1, {M - 1}]")
    cond = joint.conditional()
    lists = []
    for y, s in enumerate(sizes):
        order = np.argsort(-cond[:, y], kind="stable")
        lists.append(tuple(sorted(int(x) for x in order[:s])))
    return ListDecoder(lists=tuple(lists), alphabet_size=M, size=int(L) if fixed else None)


def _check_decoder(joint: JointPMF, decoder: ListDecoder) -> None:
    if decoder.alphabet_size != joint.M or len(decoder.lists) != joint.K:
        raise DimensionMismatchError(
            f"decoder covers {len(decoder.lists)} outputs over {decoder.alphabet_size} symbols; "
            f"joint is {joint.M} x {joint.K}"
        )


def error_probability(joint: JointPMF, decoder: ListDecoder) -> ErrorProbReport:
    """P[X not in L(Y)] by summation, with the conditional error for every y."""
    _check_decoder(joint, decoder)
    pxy = joint.array
    py = pxy.sum(axis=0)
    hits = np.array([pxy[list(lst), y].sum() for y, lst in enumerate(decoder.lists)])
    per_y = np.where(py > 0.0, 1.0 - hits / np.where(py > 0.0, py, 1.0), 0.0)
    p_err = max(0.0, 1.0 - math.fsum(hits))
    return ErrorProbReport(p_error=p_err, per_y=tuple(float(v) for v in per_y))


# ---------------------------------------------------------------- inversion helper

def smallest_feasible(feasible_margin: Callable[[np.ndarray], np.ndarray], hi: float, step: float = SCAN_STEP) -> float:
    """Smallest p in [0, hi] with feasible_margin(p) >= 0.

    A uniform scan at `step` finds the first feasible cell, then bisection
    refines inside it. Returns 0 when p = 0 is already feasible.
    """
    hi = max(float(hi), 0.0)
    count = max(int(math.ceil(hi / step)), 1) + 1
    grid = np.linspace(0.0, hi, count)
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = np.asarray(feasible_margin(grid), dtype=float) >= 0.0
    if not ok.any():
        logger.debug("no feasible p in [0, %g]; returning the upper end", hi)
        return hi
    k = int(np.argmax(ok))
    if k == 0:
        return 0.0
    a, b = float(grid[k - 1]), float(grid[k])
    for _ in range(_BISECTIONS):
        m = 0.5 * (a + b)
        with np.errstate(divide="ignore", invalid="ignore"):
            if float(np.asarray(feasible_margin(np.array([m])))[0]) >= 0.0:
                b = m
            else:
                a = m
    return b


def _binary_kl(p: np.ndarray, q: float) -> np.ndarray:
    return xlogy(p, p / q) + xlogy(1.0 - p, (1.0 - p) / (1.0 - q))


# ---------------------------------------------------------------- fixed-size lists

def posterior_stats(joint: JointPMF) -> Tuple[float, float]:
    """(E[P_{X|Y}(X|Y)], sup of P_{X|Y}(x|y) over outputs of positive mass)."""
    pxy = joint.array
    cond = joint.conditional()
    py = pxy.sum(axis=0)
    expected = float(np.sum(pxy * cond))
    sup = float(cond[:, py > 0.0].max())
    return expected, sup


def fano_lower_bound(joint: JointPMF, L: int, variant: FanoVariant = "kl", alpha: Optional[float] = None) -> float:
    """Lower bound on the error probability of any size-L list decoder.

    kl: H(X|Y) <= ln M - d(P_L || 1 - L/M); renyi: the same with Arimoto-Renyi
    H_alpha and the binary Renyi divergence; refined_a and refined_b subtract
    the SDPI correction, refined_b assuming the decoder keeps the L most
    probable symbols. The bound is the smallest P_L in [0, 1 - L/M] that
    satisfies the inequality.
    """
    M = joint.M
    if not 1 <= L < M:
        raise ParameterError(f"list size {L} out of range. Expected: [1, {M - 1}]")
    if variant not in FANO_VARIANTS:
        raise ParameterError(f"unknown Fano variant {variant!r}. Expected: {list(FANO_VARIANTS)}")
    c = 1.0 - L / M
    log_m = math.log(M)

    if variant == "renyi":
        if alpha is None:
            raise ParameterError("the renyi variant needs an order alpha")
        a = float(alpha)
        if a == 1.0:
            return fano_lower_bound(joint, L, "kl")
        h = arimoto_conditional_entropy(a, joint)

        def margin(p):
            s = L ** (1.0 - a) * (1.0 - p) ** a + (M - L) ** (1.0 - a) * p ** a
            return np.log(s) / (1.0 - a) - h

        return smallest_feasible(margin, c)

    h = conditional_entropy(joint)
    expected, sup = posterior_stats(joint)

    def margin(p):
        rhs = log_m - _binary_kl(p, c)
        if variant == "refined_a":
            rhs = rhs - 0.5 * np.maximum(expected - (1.0 - p) / L - p / (M - L), 0.0) / sup
        elif variant == "refined_b":
            rhs = rhs - 0.5 * np.maximum(expected - (1.0 - p) / L, 0.0) / sup
        return rhs - h

    return smallest_feasible(margin, c)


def _generator_at(f: Generator, t: float) -> ExtendedReal:
    if t == 0.0:
        return f.f_at_zero
    return ExtendedReal.of(float(f.eval(t)))


def generalized_fano_f(
    joint: JointPMF, L: int, f: Generator, decoder: Optional[ListDecoder] = None,
) -> GeneralizedFano:
    """E[D_f(P_{X|Y}(.|Y) || U_M)] against its two-point lower bound at the decoder's P_L.

    The decoder defaults to the top-L decoder.
    """
    M = joint.M
    if not 1 <= L < M:
        raise ParameterError(f"list size {L} out of range. Expected: [1, {M - 1}]")
    decoder = decoder or top_l_decoder(joint, L)
    if decoder.size != L:
        raise ParameterError(f"decoder lists have size {decoder.size}; expected fixed size {L}")
    p_l = error_probability(joint, decoder).p_error
    cond = joint.conditional()
    py = joint.array.sum(axis=0)
    u = np.full(M, 1.0 / M)
    parts = [divergence_value(f, cond[:, y], u) for y in range(joint.K) if py[y] > 0.0]
    weights = py[py > 0.0]
    lhs = ExtendedReal.inf() if any(math.isinf(v) for v in parts) else ExtendedReal.of(
        math.fsum(w * v for w, v in zip(weights, parts)))
    rhs = (_generator_at(f, M * (1.0 - p_l) / L) * (L / M)
           + _generator_at(f, M * p_l / (M - L)) * (1.0 - L / M))
    return GeneralizedFano(lhs=lhs, rhs=rhs)


def s_norm_bound(joint: JointPMF, L: int, s: float = 2.0) -> float:
    """1 - L/M - (L^(1-s) + (M-L)^(1-s))^(-1/s) (E[sum_x |P_{X|Y} - 1/M|^s])^(1/s), clamped at 0."""
    M = joint.M
    if not 1 <= L < M:
        raise ParameterError(f"list size {L} out of range. Expected: [1, {M - 1}]")
    if not s >= 1.0:
        raise ParameterError(f"s={s!r} must be at least 1")
    py = joint.array.sum(axis=0)
    dev = np.sum(np.abs(joint.conditional() - 1.0 / M) ** s, axis=0)
    moment = float(np.dot(py, dev))
    scale = (L ** (1.0 - s) + (M - L) ** (1.0 - s)) ** (-1.0 / s)
    return max(1.0 - L / M - scale * moment ** (1.0 / s), 0.0)


# ---------------------------------------------------------------- variable-size lists

def ahlswede_korner_bounds(joint: JointPMF, decoder: ListDecoder) -> AhlswedeKornerBounds:
    """Right sides of the two Fano-type inequalities for variable-size lists, and the implied P_L bounds.

    general: h(P_L) + E[ln |L(Y)|] + P_L ln M; maxN: h(P_L) + (1 - P_L) ln N + P_L ln M.
    """
    _check_decoder(joint, decoder)
    M = joint.M
    h = conditional_entropy(joint)
    p_l = error_probability(joint, decoder).p_error
    py = joint.array.sum(axis=0)
    sizes = np.array(decoder.sizes, dtype=float)
    e_log_size = float(np.dot(py, np.log(sizes)))
    log_n = math.log(float(sizes.max()))
    log_m = math.log(M)

    def h2(p):
        return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))

    def general(p):
        return h2(p) + e_log_size + p * log_m - h

    def max_n(p):
        return h2(p) + (1.0 - p) * log_n + p * log_m - h

    return AhlswedeKornerBounds(
        conditional_entropy=h,
        h_bound_general=binary_entropy(p_l) + e_log_size + p_l * log_m,
        h_bound_maxN=binary_entropy(p_l) + (1.0 - p_l) * log_n + p_l * log_m,
        implied_PL_lower=smallest_feasible(general, 1.0),
        implied_PL_lower_maxN=smallest_feasible(max_n, 1.0),
    )


def _variable_bound(joint: JointPMF, decoder: ListDecoder, gamma: float) -> float:
    M = joint.M
    py = joint.array.sum(axis=0)
    e_size = float(np.dot(py, decoder.sizes))
    spread = float(np.dot(py, np.sum(np.abs(joint.conditional() - gamma / M), axis=0)))
    return (1.0 + gamma) / 2.0 - gamma * e_size / M - 0.5 * spread


def _equality_structure(joint: JointPMF, decoder: ListDecoder, gamma: float) -> bool:
    """Top-|L(y)| lists with a two-level posterior whose in-list level lies in [gamma/M, 1/|L(y)|]."""
    M = joint.M
    cond = joint.conditional()
    py = joint.array.sum(axis=0)
    tol = _EQUALITY_TOL
    for y, lst in enumerate(decoder.lists):
        if py[y] <= 0.0:
            continue
        size = len(lst)
        if size > M / gamma + tol:
            return False
        col = cond[:, y]
        inside = col[list(lst)]
        outside = np.delete(col, list(lst))
        level = float(inside[0])
        if np.any(np.abs(inside - level) > tol):
            return False
        if outside.size:
            if np.any(np.abs(outside - (1.0 - level * size) / (M - size)) > tol):
                return False
            if float(outside.max()) > level + tol:
                return False
        if not gamma / M - tol <= level <= 1.0 / size + tol:
            return False
    return True


def variable_list_bound(
    joint: JointPMF,
    decoder: ListDecoder,
    gamma: float = 1.0,
    scan_gamma: bool = False,
    grid_points: int = 1001,
) -> VariableListBound:
    """(1 + gamma)/2 - gamma E|L(Y)|/M - E[sum_x |P_{X|Y} - gamma/M|]/2, clamped at 0.

    With scan_gamma the best gamma on a grid over [1, M / max |L(y)|] is used.
    """
    _check_decoder(joint, decoder)
    if not gamma >= 1.0:
        raise ParameterError(f"gamma={gamma!r} must be at least 1")
    best_gamma = float(gamma)
    best = _variable_bound(joint, decoder, best_gamma)
    if scan_gamma:
        top = joint.M / max(decoder.sizes)
        if top > 1.0:
            for g in np.linspace(1.0, top, grid_points):
                v = _variable_bound(joint, decoder, float(g))
                if v > best:
                    best, best_gamma = v, float(g)
        logger.debug("gamma scan on [1, %g]: best gamma %g", top, best_gamma)
    return VariableListBound(
        bound=max(best, 0.0),
        gamma_star=best_gamma,
        equality_diagnosis=_equality_structure(joint, decoder, best_gamma),
    )
