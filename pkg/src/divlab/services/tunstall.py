"""Tunstall parse trees and how close their leaf distribution is to uniform."""
from __future__ import annotations
import heapq
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from divlab.core.exceptions import NumericalError, ParameterError, UnreachableLeafCountError
from divlab.core.extended import ExtendedReal
from divlab.core.generators import Generator, degroot
from divlab.core.models import (
    ClosenessBounds, IntegralCheck, ProbVec, RateGuarantee, RhoSimplexParams, SourceModel,
    TunstallLeaf, TunstallTree,
)
from divlab.core.numerics import integrate
from divlab.services.divergence import divergence_value, entropy
from divlab.services.majorization import d_f_asymptotic, delta_alpha, kl_rho_max, u_f

logger = logging.getLogger(__name__)

MAX_LEAVES = 1 << 22

Node = Tuple[Tuple[int, ...], float]


# ---------------------------------------------------------------- construction

def _check_leaf_count(source: SourceModel, n: int) -> None:
    d = source.D
    if n < 1 or (n - 1) % (d - 1) != 0:
        below = 1 + max((n - 1) // (d - 1), 0) * (d - 1)
        above = below + (d - 1)
        raise UnreachableLeafCountError(
            f"{n} leaves is not reachable with D={d}; nearest feasible counts are {below} and {above}"
        )
    if n > MAX_LEAVES:
        raise ParameterError(f"{n} leaves exceeds the limit of {MAX_LEAVES}")


def _target_leaves(source: SourceModel, leaves: Optional[int], codeword_len: Optional[int],
                   code_alphabet: Optional[int]) -> int:
    if (leaves is None) == (codeword_len is None):
        raise ParameterError("give either a leaf count or a codeword length with a code alphabet")
    if leaves is not None:
        _check_leaf_count(source, int(leaves))
        return int(leaves)
    if code_alphabet is None or code_alphabet < 2:
        raise ParameterError(f"code alphabet size {code_alphabet!r} must be at least 2")
    if codeword_len < 1:
        raise ParameterError(f"codeword length {codeword_len!r} must be at least 1")
    cap = code_alphabet ** codeword_len
    d = source.D
    n = 1 + ((cap - 1) // (d - 1)) * (d - 1)
    _check_leaf_count(source, n)
    return n


def _to_tree(source: SourceModel, nodes: List[Node]) -> TunstallTree:
    leaves = tuple(TunstallLeaf(word=w, probability=p) for w, p in sorted(nodes))
    return TunstallTree(source=source, leaves=leaves)


def build_tree(
    source: SourceModel,
    leaves: Optional[int] = None,
    *,
    codeword_len: Optional[int] = None,
    code_alphabet: Optional[int] = None,
) -> TunstallTree:
    """Greedy Tunstall tree: split the most probable leaf into D children until the target size.

    Ties go to the lexicographically smallest word. With a codeword length m over
    an alphabet of size k the tree grows while leaves + (D - 1) <= k^m.
    """
    n = _target_leaves(source, leaves, codeword_len, code_alphabet)
    pmf = source.pmf.masses
    heap: List[Tuple[float, Tuple[int, ...]]] = [(-1.0, ())]
    count = 1
    while count < n:
        neg_p, word = heapq.heappop(heap)
        for s, ps in enumerate(pmf):
            heapq.heappush(heap, (neg_p * ps, word + (s,)))
        count += source.D - 1
    logger.debug("built Tunstall tree with %d leaves for D=%d", n, source.D)
    return _to_tree(source, [(w, -neg) for neg, w in heap])


def random_tree(source: SourceModel, leaves: int, rng: np.random.Generator) -> TunstallTree:
    """A D-ary parse tree of the given size grown by splitting uniformly chosen leaves."""
    _check_leaf_count(source, leaves)
    pmf = source.pmf.masses
    nodes: List[Node] = [((), 1.0)]
    while len(nodes) < leaves:
        word, p = nodes.pop(int(rng.integers(len(nodes))))
        nodes.extend((word + (s,), p * ps) for s, ps in enumerate(pmf))
    return _to_tree(source, nodes)


def tree_frame(tree: TunstallTree) -> pd.DataFrame:
    sep = "" if tree.source.D <= 10 else "."
    return pd.DataFrame({
        "word": [leaf.label(sep) for leaf in tree.leaves],
        "probability": [leaf.probability for leaf in tree.leaves],
        "depth": [leaf.depth for leaf in tree.leaves],
    })


def expected_length(tree: TunstallTree) -> float:
    return tree.expected_length()


def compression_rate(tree: TunstallTree, code_alphabet: int) -> float:
    """ceil(log_k n) ln k / E[parse length], in nats per source symbol."""
    if code_alphabet < 2:
        raise ParameterError(f"code alphabet size {code_alphabet!r} must be at least 2")
    length = tree.expected_length()
    if not length > 0.0:
        raise ParameterError(f"a {tree.n}-leaf tree parses nothing; compression rate needs at least 2 leaves")
    m = math.ceil(math.log(tree.n) / math.log(code_alphabet) - 1e-12)
    return m * math.log(code_alphabet) / length


# ---------------------------------------------------------------- closeness to uniform

def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def degroot_closeness(tree: TunstallTree, omega: float) -> float:
    """d_{omega,n}(P_leaves): DeGroot information between the leaf pmf and U_n."""
    p = tree.leaf_pmf().array
    return divergence_value(degroot(omega), p, _uniform(p.size))


def closeness_bounds(source: SourceModel, n: int, omega: float) -> ClosenessBounds:
    """Upper bounds on d_{omega,n} for Tunstall trees: the Q_beta maximum at this n, and its n-free limit."""
    phi = degroot(omega)
    if n < 2 or source.rho == 1.0:
        return ClosenessBounds(finite_n_bound=0.0, asymptotic_bound=d_f_asymptotic(phi, source.rho))
    finite = u_f(RhoSimplexParams(n=n, rho=source.rho), phi).value
    return ClosenessBounds(finite_n_bound=finite, asymptotic_bound=d_f_asymptotic(phi, source.rho))


def _degroot_profile(p: np.ndarray):
    """omega -> d_{omega,n}(p), vectorized over omega."""
    t = p.size * p

    def profile(omega):
        w = np.asarray(omega, dtype=float)[:, None]
        phi = np.minimum(w, 1.0 - w) - np.minimum(w, 1.0 - w * t[None, :])
        return phi.mean(axis=1)

    return profile


def integral_representation_check(tree: TunstallTree, f: Generator, tol: float = 1e-10) -> IntegralCheck:
    """D_f(P_leaves||U_n) against the integral of d_{omega,n} f''((1 - omega)/omega) / omega^3."""
    p = tree.leaf_pmf().array
    direct = ExtendedReal.of(divergence_value(f, p, _uniform(p.size)))
    if not f.smooth or f.f_at_zero.infinite:
        note = f"{f.name} is not twice differentiable and continuous at 0; check skipped"
        logger.warning(note)
        return IntegralCheck(direct=direct, skipped=True, note=note)
    t = p.size * p
    # d_{omega,n} vanishes outside [1/(1 + t_max), 1/(1 + t_min)]
    lo, hi = 1.0 / (1.0 + float(t.max())), 1.0 / (1.0 + float(t.min()))
    if hi - lo <= 0.0:
        return IntegralCheck(direct=direct, integral=0.0, abs_gap=abs(float(direct)))
    profile = _degroot_profile(p)

    def integrand(omega):
        return profile(omega) / omega ** 3 * f.d2((1.0 - omega) / omega)

    cuts = sorted({*(1.0 / (1.0 + float(x)) for x in np.unique(t)), 0.5})
    try:
        value = integrate(integrand, lo, hi, breakpoints=cuts, tol=tol)
    except NumericalError as exc:
        note = f"integrand diverges: {exc}"
        logger.warning(note)
        return IntegralCheck(direct=direct, skipped=True, note=note)
    gap = abs(float(direct) - value) if direct.is_finite else math.inf
    return IntegralCheck(direct=direct, integral=value, abs_gap=gap)


# ---------------------------------------------------------------- compression rate

def rate_slack(D: int, m: int, code_alphabet: int, epsilon: float) -> float:
    """d(m, eps) = m eps ln k / (1 + eps), plus ln(1 - (D-1)/k^m) when D > 2."""
    if not epsilon > 0.0:
        raise ParameterError(f"epsilon={epsilon!r} must be positive")
    d = m * epsilon * math.log(code_alphabet) / (1.0 + epsilon)
    if D > 2:
        d += math.log1p(-(D - 1) / code_alphabet ** m)
    return d


def rate_guarantee(source: SourceModel, m: int, code_alphabet: int, epsilon: float) -> RateGuarantee:
    """Minimal p_min under which a length-m Tunstall code compresses within (1 + eps) H(P).

    The exact threshold is W_0(-e^{-d-1}) / W_{-1}(-e^{-d-1}); the simple one
    1/(1 + sqrt(8d)) is more demanding.
    """
    if code_alphabet < 2 or m < 1:
        raise ParameterError(f"need m >= 1 and a code alphabet of at least 2, got m={m}, k={code_alphabet}")
    D = source.D
    d = rate_slack(D, m, code_alphabet, epsilon)
    if not d > 0.0:
        raise ParameterError(f"d(m, eps) = {d!r} is not positive; increase epsilon or m")
    rho_max = kl_rho_max(d)
    exact = 1.0 / rho_max.exact
    simple = 1.0 / rho_max.simple

    rho = source.rho
    excess = delta_alpha(1.0, rho) if rho > 1.0 else 0.0
    log_k = math.log(code_alphabet)
    denom = m - excess / log_k
    if D > 2:
        denom += math.log1p(-(D - 1) / code_alphabet ** m) / log_k
    h = entropy("shannon", source.pmf)
    rate_ub = ExtendedReal.inf() if denom <= 0.0 else ExtendedReal.of(m * h / denom)
    return RateGuarantee(
        d=d,
        p_min_threshold_exact=exact,
        p_min_threshold_simple=simple,
        rate_upper_bound=rate_ub,
        guarantee_holds=bool(source.p_min >= exact * (1.0 - 1e-12)),
    )


def source_from_masses(masses) -> SourceModel:
    return SourceModel(pmf=ProbVec.parse(masses, label="source"))
