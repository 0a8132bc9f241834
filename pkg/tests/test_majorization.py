import math

import numpy as np
import pytest
from pydantic import ValidationError

from divlab.core.exceptions import ParameterError, PreconditionError
from divlab.core.generators import alpha_generator, chi2_pearson, hellinger2, kl, total_variation
from divlab.core.models import Interval, ProbVec, RhoSimplexParams
from divlab.core.numerics import maximize_1d
from divlab.services.majorization import (
    alpha_from_uniform_max, chi2_asymptotic, d_f_asymptotic, delta_alpha, doubly_stochastic_mix,
    finite_n_bounds, g_f_rho, hellinger_asymptotic, kl_asymptotic, kl_d_for_rho, kl_rho_max, majorizes,
    norm_gap_bound, phi_alpha, phi_rho_max, phi_upper_bounds, q_beta, random_majorized, random_member,
    rho_budget, thm6_gap_bounds, thm7_extras, tsallis_binary_family, tsallis_gap_bounds, tv_asymptotic,
    u_f, variational_check,
)
from divlab.services.tunstall import rate_slack


def test_uniform_is_majorized_by_everything(rng):
    u = ProbVec.uniform(4)
    P = ProbVec(masses=(0.7, 0.1, 0.1, 0.1))
    assert majorizes(u, P).holds
    report = majorizes(P, u)
    assert not report.holds
    assert report.first_violated_k == 1


def test_rho_simplex_needs_finite_rho():
    assert RhoSimplexParams(n=3, rho=1.0).gamma_interval == (1.0 / 3.0, 1.0 / 3.0)
    for rho in (math.inf, math.nan, 0.5):
        with pytest.raises(ValidationError):
            RhoSimplexParams(n=3, rho=rho)


def test_majorization_pads_shorter_vectors():
    assert majorizes(ProbVec(masses=(0.5, 0.5)), ProbVec(masses=(0.6, 0.3, 0.1))).holds is False
    assert majorizes(ProbVec(masses=(0.4, 0.3, 0.3)), ProbVec(masses=(0.5, 0.5))).holds


def test_doubly_stochastic_mixes_are_majorized(rng):
    Q = ProbVec(masses=(0.5, 0.3, 0.15, 0.05))
    mixed = doubly_stochastic_mix(Q, [0.5, 0.5], [[0, 1, 2, 3], [3, 2, 1, 0]])
    assert np.allclose(mixed.array, [0.275, 0.225, 0.225, 0.275])
    for _ in range(50):
        assert majorizes(random_majorized(Q, rng), Q).holds
    with pytest.raises(ParameterError):
        doubly_stochastic_mix(Q, [1.0], [[0, 0, 1, 2]])


@pytest.mark.parametrize("f", [kl(), chi2_pearson(), hellinger2()])
def test_uniform_gap_sandwich(rng, f):
    params = RhoSimplexParams(n=6, rho=5.0)
    for _ in range(30):
        Q = random_member(params, rng)
        P = random_majorized(Q, rng)
        g = thm6_gap_bounds(f, P, Q)
        slack = 1e-12 * (1.0 + abs(g.exact))
        assert float(g.lb) <= g.exact + slack
        assert g.exact <= float(g.ub) + slack
        assert norm_gap_bound(P, Q, params.rho) >= float(np.dot(Q.array, Q.array) - np.dot(P.array, P.array))


def test_uniform_gap_chi2_is_exact(rng):
    Q = random_member(RhoSimplexParams(n=5, rho=3.0), rng)
    P = random_majorized(Q, rng)
    g = thm6_gap_bounds(chi2_pearson(), P, Q)
    assert abs(float(g.lb) - g.exact) < 1e-12
    assert abs(float(g.ub) - g.exact) < 1e-12


def test_uniform_gap_requires_majorization():
    with pytest.raises(PreconditionError):
        thm6_gap_bounds(kl(), ProbVec(masses=(0.8, 0.2)), ProbVec.uniform(2))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0])
def test_tsallis_gap_sandwich(rng, alpha):
    params = RhoSimplexParams(n=5, rho=4.0)
    for _ in range(20):
        Q = random_member(params, rng)
        P = random_majorized(Q, rng)
        t = tsallis_gap_bounds(alpha, P, Q)
        slack = 1e-12 * (1.0 + abs(t.exact))
        assert t.L <= t.exact + slack
        assert t.exact <= t.U + slack
        if alpha == 2.0:
            assert abs(t.L - t.exact) < 1e-12 and abs(t.U - t.exact) < 1e-12


def test_tsallis_bounds_tighten_near_uniform():
    P, Q = tsallis_binary_family(2.0, 1e-4)
    t = tsallis_gap_bounds(3.0, P, Q)
    assert abs(t.exact / t.L - 1.0) < 1e-2
    assert abs(t.U / t.L - 1.0) < 1e-2
    with pytest.raises(ParameterError):
        tsallis_binary_family(1.0, 0.1)


def test_q_beta_majorizes_members(rng):
    params = RhoSimplexParams(n=6, rho=4.0)
    for _ in range(100):
        P = random_member(params, rng)
        qb = q_beta(params, P.p_min)
        assert params.contains(qb.masses)
        assert majorizes(P, qb.masses).holds


def _vertex_maximum(f, n, rho):
    best = -math.inf
    for k in range(1, n):
        beta = 1.0 / (n + k * (rho - 1.0))
        q = np.array([rho * beta] * k + [beta] * (n - k))
        best = max(best, float(np.sum(f(n * q)) / n))
    return best


def _grid_maximum(f, rho, steps=500):
    i, j = np.meshgrid(np.arange(1, steps), np.arange(1, steps), indexing="ij")
    a, b = i / steps, j / steps
    c = 1.0 - a - b
    ok = c > 0.0
    q = np.stack([a[ok], b[ok], c[ok]])
    ok = q.max(axis=0) <= rho * q.min(axis=0) * (1.0 + 1e-12)
    q = q[:, ok]
    return float(np.max(np.mean(f(3.0 * q), axis=0)))


@pytest.mark.parametrize("gen,fn", [
    (chi2_pearson(), lambda t: (t - 1.0) ** 2),
    (kl(), lambda t: t * np.log(t) + 1.0 - t),
    (total_variation(), lambda t: np.abs(t - 1.0)),
])
def test_u_f_matches_brute_force(gen, fn):
    params = RhoSimplexParams(n=3, rho=3.0)
    opt = u_f(params, gen)
    assert abs(opt.value - _vertex_maximum(fn, 3, 3.0)) < 1e-9
    assert abs(opt.value - _grid_maximum(fn, 3.0)) < 1e-4


@pytest.mark.parametrize("rho", [2.0, 4.0, 10.0])
def test_closed_form_limits(rho):
    tv, x_star = tv_asymptotic(rho)
    assert abs(d_f_asymptotic(total_variation(), rho) - tv) < 1e-9
    assert abs(d_f_asymptotic(chi2_pearson(), rho) - chi2_asymptotic(rho)) < 1e-9
    assert abs(d_f_asymptotic(hellinger2(), rho) - hellinger_asymptotic(rho)) < 1e-9
    assert abs(d_f_asymptotic(kl(), rho) - kl_asymptotic(rho)) < 1e-9
    assert abs(g_f_rho(total_variation(), rho, x_star) - tv) < 1e-12


def test_tv_limit_at_rho_four():
    res = maximize_1d(lambda x: g_f_rho(total_variation(), 4.0, x), Interval(lo=0.0, hi=1.0), vectorized=True)
    assert abs(res.max - 2.0 / 3.0) < 1e-12
    assert abs(res.argmax - 1.0 / 3.0) < 1e-6


@pytest.mark.parametrize("f", [kl(), chi2_pearson()])
@pytest.mark.parametrize("n", [2, 5, 20])
def test_finite_n_bounds_bracket_u_f(f, n):
    b = finite_n_bounds(f, n, 4.0)
    value = u_f(RhoSimplexParams(n=n, rho=4.0), f).value
    assert b.lb <= value + 1e-9
    assert value <= b.ub + 1e-9


@pytest.mark.parametrize("rho", [1.5, 2.0, 10.0, 100.0])
def test_delta_alpha_matches_numeric_limit(rho):
    for a in (-1.0, 0.0, 0.5, 1.0, 2.0, 3.0):
        numeric = d_f_asymptotic(alpha_generator(a), rho)
        closed = delta_alpha(a, rho)
        assert abs(numeric - closed) < 1e-7 * (1.0 + closed)


def test_delta_alpha_symmetry_and_minimum():
    for rho in (1.5, 4.0, 30.0):
        for a in (-2.0, -0.5, 0.25, 2.0, 3.5):
            assert abs(delta_alpha(a, rho) - delta_alpha(1.0 - a, rho)) < 1e-10 * delta_alpha(a, rho)
        half = delta_alpha(0.5, rho)
        assert abs(half - 4.0 * (rho ** 0.25 - 1.0) ** 2 / (math.sqrt(rho) + 1.0)) < 1e-12
        assert all(delta_alpha(a, rho) >= half for a in (-1.0, 0.0, 0.3, 0.7, 1.0, 2.0))
    assert abs(delta_alpha(-1.0, 4.0) - 9.0 / 32.0) < 1e-12


def test_uniform_max_of_alpha_divergence_tends_to_delta():
    value = alpha_from_uniform_max(2.0, 200, 4.0)
    assert value <= delta_alpha(2.0, 4.0) + 1e-9
    assert value >= delta_alpha(2.0, 4.0) - 1e-2


@pytest.mark.parametrize("d", [0.01, 0.6301, 2.0])
def test_kl_rho_max_round_trip(d):
    res = kl_rho_max(d)
    assert res.simple <= res.exact
    assert abs(delta_alpha(1.0, res.exact) - d) < 1e-9 * d
    back = kl_d_for_rho(res.exact)
    assert abs(back.exact - d) < 1e-9 * d
    assert back.simple >= back.exact


def test_tunstall_example_threshold():
    d = rate_slack(2, 10, 2, 0.1)
    assert abs(d - 0.6301) < 1e-4
    assert abs(1.0 / kl_rho_max(d).exact - 0.0978) < 5e-4
    with pytest.raises(ParameterError):
        kl_rho_max(0.0)


@pytest.mark.parametrize("rho", [1.5, 2.0, 4.0, 8.0])
def test_phi_upper_bounds_dominate(rho):
    phi = phi_alpha(1.0, rho)
    b = phi_upper_bounds(1.0, rho)
    for ub in (b.ub1, b.ub2, b.ub3):
        assert phi <= ub + 1e-12


@pytest.mark.parametrize("d", [0.01, 0.5, 3.0])
def test_phi_rho_max_meets_budget(d):
    rho = phi_rho_max(1.0, d)
    assert abs(phi_upper_bounds(1.0, rho).ub3 - d) < 1e-9 * (1.0 + d)
    assert phi_alpha(1.0, rho) <= d + 1e-12


def test_local_curvature_bounds(rng):
    params = RhoSimplexParams(n=5, rho=3.0)
    for _ in range(20):
        Q = random_member(params, rng)
        ex = thm7_extras(kl(), 5, 3.0, Q, k_f=1.0, d=0.1)
        assert not ex.k_f_estimated
        assert abs(ex.conv_rate_n - 0.2) < 1e-15
        assert ex.m_lower <= ex.divergence + 1e-12
        assert ex.divergence <= float(ex.m_upper) + 1e-12
        assert float(ex.m_upper) <= float(ex.m_upper_simplex) + 1e-12
        assert abs(ex.rho_budget - rho_budget(3.0, 0.1)) < 1e-12


def test_rho_budget_solves_its_equation():
    rho = rho_budget(2.0, 0.1)
    assert abs(2.0 * (rho - 1.0) ** 2 / (8.0 * rho) - 0.1) < 1e-12
    with pytest.raises(ParameterError):
        rho_budget(math.inf, 0.1)


def test_estimated_slope_is_flagged():
    ex = thm7_extras(chi2_pearson(), 4, 2.0)
    assert ex.k_f_estimated
    assert ex.conv_rate_n > 0.0


def test_variational_inequality(rng):
    params = RhoSimplexParams(n=4, rho=3.0)
    for _ in range(5):
        P = random_member(params, rng)
        g = rng.uniform(-1.0, 1.0, size=4)
        res = variational_check(kl(), 4, 3.0, g, P)
        assert res.holds
        assert res.lhs <= float(res.rhs) + 1e-9
        assert abs(res.achieving_gap) <= 1e-6
