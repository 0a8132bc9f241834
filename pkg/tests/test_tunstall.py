import math

import numpy as np
import pytest

from divlab.core.exceptions import ParameterError, UnreachableLeafCountError
from divlab.core.generators import chi2_pearson, kl, kl_reverse, total_variation
from divlab.services.divergence import entropy
from divlab.services.majorization import majorizes
from divlab.services.tunstall import (
    build_tree, closeness_bounds, compression_rate, degroot_closeness, expected_length,
    integral_representation_check, random_tree, rate_guarantee, rate_slack, source_from_masses, tree_frame,
)


def test_small_binary_tree():
    tree = build_tree(source_from_masses([0.7, 0.3]), 3)
    df = tree_frame(tree)
    assert list(df["word"]) == ["00", "01", "1"]
    assert np.allclose(df["probability"], [0.49, 0.21, 0.3])
    assert list(df["depth"]) == [2, 2, 1]
    assert abs(expected_length(tree) - 1.7) < 1e-12


def test_codeword_length_sets_leaf_count():
    source = source_from_masses([0.6, 0.4])
    assert build_tree(source, codeword_len=3, code_alphabet=2).n == 8
    ternary = source_from_masses([0.5, 0.3, 0.2])
    # 1 + 2j <= 2^3
    assert build_tree(ternary, codeword_len=3, code_alphabet=2).n == 7


def test_leaf_count_must_be_reachable():
    source = source_from_masses([0.5, 0.3, 0.2])
    with pytest.raises(UnreachableLeafCountError):
        build_tree(source, 4)
    with pytest.raises(ParameterError):
        build_tree(source)
    with pytest.raises(ParameterError):
        build_tree(source, 5, codeword_len=2, code_alphabet=2)


def test_tunstall_maximizes_expected_length(rng):
    source = source_from_masses([0.55, 0.3, 0.15])
    best = expected_length(build_tree(source, 21))
    for _ in range(40):
        assert expected_length(random_tree(source, 21, rng)) <= best + 1e-12


@pytest.mark.parametrize("masses,n", [([0.7, 0.3], 16), ([0.5, 0.3, 0.2], 15)])
def test_tunstall_leaves_are_majorized_by_any_tree(rng, masses, n):
    source = source_from_masses(masses)
    tunstall = build_tree(source, n)
    p = tunstall.leaf_pmf()
    assert max(p.masses) / min(p.masses) <= 1.0 / min(masses) + 1e-12
    for _ in range(100):
        other = random_tree(source, n, rng)
        assert majorizes(p, other.leaf_pmf()).holds
        for omega in (0.2, 0.5, 0.8):
            assert degroot_closeness(tunstall, omega) <= degroot_closeness(other, omega) + 1e-12


def test_one_leaf_tree_has_no_compression_rate():
    tree = build_tree(source_from_masses([0.7, 0.3]), 1)
    assert expected_length(tree) == 0.0
    with pytest.raises(ParameterError):
        compression_rate(tree, 2)
    with pytest.raises(ParameterError):
        compression_rate(build_tree(source_from_masses([0.7, 0.3]), 3), 1)


@pytest.mark.parametrize("omega", [0.3, 0.5, 0.8])
def test_closeness_to_uniform_is_bounded(omega):
    source = source_from_masses([0.7, 0.3])
    for n in (4, 9, 32):
        tree = build_tree(source, n)
        b = closeness_bounds(source, n, omega)
        assert degroot_closeness(tree, omega) <= b.finite_n_bound + 1e-12
        assert b.finite_n_bound <= b.asymptotic_bound + 1e-9


@pytest.mark.parametrize("f", [chi2_pearson(), kl()])
def test_integral_representation_matches_direct(f):
    tree = build_tree(source_from_masses([0.6, 0.25, 0.15]), 9)
    check = integral_representation_check(tree, f)
    assert not check.skipped
    assert check.abs_gap <= 1e-6


@pytest.mark.parametrize("f", [total_variation(), kl_reverse()])
def test_integral_representation_skips_unsuitable_generators(f):
    tree = build_tree(source_from_masses([0.6, 0.4]), 5)
    check = integral_representation_check(tree, f)
    assert check.skipped
    assert check.note


def test_rate_slack():
    assert abs(rate_slack(2, 10, 2, 0.1) - 10 * 0.1 * math.log(2.0) / 1.1) < 1e-15
    assert rate_slack(3, 10, 2, 0.1) < rate_slack(2, 10, 2, 0.1)
    with pytest.raises(ParameterError):
        rate_slack(2, 10, 2, 0.0)


def test_rate_guarantee_threshold():
    good = rate_guarantee(source_from_masses([0.85, 0.15]), 10, 2, 0.1)
    assert abs(good.d - 0.6301) < 1e-4
    assert abs(good.p_min_threshold_exact - 0.0978) < 5e-4
    assert good.p_min_threshold_simple >= good.p_min_threshold_exact
    assert good.guarantee_holds
    bad = rate_guarantee(source_from_masses([0.95, 0.05]), 10, 2, 0.1)
    assert not bad.guarantee_holds


def test_rate_upper_bound_covers_the_code():
    source = source_from_masses([0.85, 0.15])
    g = rate_guarantee(source, 10, 2, 0.1)
    h = entropy("shannon", source.pmf)
    assert float(g.rate_upper_bound) <= 1.1 * h
    tree = build_tree(source, codeword_len=10, code_alphabet=2)
    assert compression_rate(tree, 2) <= float(g.rate_upper_bound) + 1e-12
    assert compression_rate(tree, 2) >= h - 1e-12
