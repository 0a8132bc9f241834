import math

import numpy as np
import pytest

from divlab.core.exceptions import ParameterError
from divlab.core.models import ProbVec
from divlab.services.f_alpha import (
    ALPHA_MIN, asymptotic_alpha_threshold, asymptotic_value, binary_falpha, contraction_ratio_upper,
    d_falpha, falpha_alpha_derivative, falpha_bounds, falpha_difference_bounds, falpha_generator, k_alpha,
)

from conftest import random_pmf

ALPHAS = [ALPHA_MIN, 0.5, 1.0, 4.0, 16.0, 100.0]


def _pair(p, q):
    return ProbVec.bernoulli(p), ProbVec.bernoulli(q)


def test_vanishes_on_equal_arguments():
    u = ProbVec.uniform(3)
    for a in ALPHAS:
        assert float(falpha_generator(a).eval(1.0)) == 0.0
        assert float(d_falpha(a, u, u)) == 0.0


def test_alpha_below_minimum_is_rejected():
    with pytest.raises(ParameterError):
        falpha_generator(0.1)
    with pytest.raises(ParameterError):
        k_alpha(0.2)


def test_k_alpha_is_positive_and_increasing():
    ks = [k_alpha(a) for a in ALPHAS]
    assert ks[0] > 0.2
    assert all(b > a for a, b in zip(ks, ks[1:]))


@pytest.mark.parametrize("p,q", [(0.1, 0.9), (0.2, 0.8)])
def test_sandwich_on_binary_pairs(p, q):
    P, Q = _pair(p, q)
    for a in [ALPHA_MIN, *np.logspace(-0.5, 3, 24)]:
        d = float(d_falpha(float(a), P, Q))
        b = falpha_bounds(float(a), P, Q)
        assert float(b.lb_kl) <= b.lb_chi2 + 1e-12
        assert b.lb_chi2 <= d + 1e-12 * (1.0 + d)
        assert d <= float(b.ub) + 1e-12 * (1.0 + d)


def test_increasing_in_alpha():
    P, Q = _pair(0.1, 0.9)
    values = [binary_falpha(a, 0.9, 0.1) for a in (0.25, 1.0, 4.0, 16.0)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert abs(values[1] - float(d_falpha(1.0, Q, P))) < 1e-14


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_alpha_derivatives_match_finite_differences(rng, order):
    P, Q = random_pmf(rng, 4), random_pmf(rng, 4)
    alpha, h = 1.3, 1e-5

    def lower(a):
        if order == 1:
            return float(d_falpha(a, P, Q))
        return falpha_alpha_derivative(order - 1, a, P, Q)

    numeric = (lower(alpha + h) - lower(alpha - h)) / (2.0 * h)
    exact = falpha_alpha_derivative(order, alpha, P, Q)
    assert abs(numeric - exact) <= 1e-5 * max(abs(exact), 1e-8)


def test_derivative_signs_alternate(rng):
    P, Q = random_pmf(rng, 5), random_pmf(rng, 5)
    for n in range(1, 7):
        v = falpha_alpha_derivative(n, 2.0, P, Q)
        assert (-1) ** (n - 1) * v >= 0.0


def test_difference_bounds(rng):
    for _ in range(10):
        P, Q = random_pmf(rng, 4), random_pmf(rng, 4)
        for a, b in ((1.0, 0.5), (8.0, 2.0), (50.0, 49.0)):
            diff = float(d_falpha(a, P, Q)) - float(d_falpha(b, P, Q))
            res = falpha_difference_bounds(a, b, P, Q)
            assert res.lb <= diff + 1e-10
            assert diff <= res.ub + 1e-10
            assert res.ub == min(res.ub_candidates)
    with pytest.raises(ParameterError):
        falpha_difference_bounds(1.0, 2.0, P, Q)


def test_asymptotic_threshold():
    P, Q = _pair(0.2, 0.8)
    a = asymptotic_alpha_threshold(P, Q, 1e-3)
    assert a is not None
    for alpha in (a, 1e6):
        assert abs(float(d_falpha(alpha, P, Q)) - asymptotic_value(alpha, P, Q)) < 1e-3


@pytest.mark.parametrize("xi", [2.0, 10.0, 100.0])
def test_contraction_ratio_upper(xi):
    alphas = [ALPHA_MIN, *np.logspace(-0.6, 3, 39)]
    ratios = [contraction_ratio_upper(float(a), xi) for a in alphas]
    assert all(r >= 1.0 - 1e-12 for r in ratios)
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))
    assert abs(contraction_ratio_upper(1e6, xi) - 1.0) < 1e-2


def test_contraction_ratio_needs_xi_at_least_two():
    with pytest.raises(ParameterError):
        contraction_ratio_upper(1.0, 1.5)
