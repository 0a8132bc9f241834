import math

import numpy as np
import pytest

from divlab.core.exceptions import DimensionMismatchError, ParameterError
from divlab.core.generators import chi2_pearson, kl
from divlab.core.models import JointPMF, ListDecoder
from divlab.services.list_decoding import (
    ahlswede_korner_bounds, error_probability, example1_joint, example2_decoder, example2_joint,
    fano_lower_bound, generalized_fano_f, product_joint, s_norm_bound, top_l_decoder, variable_list_bound,
)

# L: (exact, fano, refined, s2)
TABLE = {
    1: (0.5, 0.353, 0.353, 0.444),
    2: (0.25, 0.178, 0.178, 0.190),
    3: (0.125, 0.065, 0.072, 5.34e-5),
    4: (0.0625, 0.0, 0.016, 0.0),
}


def _random_joint(rng, m, k):
    w = rng.dirichlet(np.ones(m * k)).reshape(m, k)
    return JointPMF(matrix=w / w.sum())


def test_top_l_lists_on_example1():
    joint = example1_joint()
    dec = top_l_decoder(joint, 2)
    assert dec.lists == ((0, 1), (7, 8))
    assert dec.size == 2


@pytest.mark.parametrize("L", [1, 2, 3, 4])
def test_table_values(L):
    joint = example1_joint()
    exact, fano, refined, s2 = TABLE[L]
    assert abs(error_probability(joint, top_l_decoder(joint, L)).p_error - exact) < 1e-15
    assert abs(fano_lower_bound(joint, L, "kl") - fano) < 6e-4
    assert abs(fano_lower_bound(joint, L, "refined_b") - refined) < 6e-4
    tol = 1e-6 if L == 3 else 6e-4
    assert abs(s_norm_bound(joint, L, 2.0) - s2) < tol


def test_bounds_never_exceed_exact_error(rng):
    for _ in range(20):
        joint = _random_joint(rng, 6, 3)
        for L in range(1, 6):
            exact = error_probability(joint, top_l_decoder(joint, L)).p_error
            assert fano_lower_bound(joint, L, "kl") <= exact + 1e-6
            assert fano_lower_bound(joint, L, "renyi", alpha=2.0) <= exact + 1e-6
            assert fano_lower_bound(joint, L, "renyi", alpha=0.5) <= exact + 1e-6
            assert s_norm_bound(joint, L, 2.0) <= exact + 1e-12


def test_renyi_order_one_falls_back_to_kl():
    joint = example1_joint()
    assert fano_lower_bound(joint, 2, "renyi", alpha=1.0) == fano_lower_bound(joint, 2, "kl")


def test_fano_argument_checks():
    joint = example1_joint()
    with pytest.raises(ParameterError):
        fano_lower_bound(joint, 9)
    with pytest.raises(ParameterError):
        fano_lower_bound(joint, 1, "renyi")
    with pytest.raises(ParameterError):
        fano_lower_bound(joint, 1, "wolfowitz")


@pytest.mark.parametrize("f", [kl(), chi2_pearson()])
def test_generalized_fano_two_point_bound(f):
    joint = example1_joint()
    for L in (1, 2, 3):
        res = generalized_fano_f(joint, L, f)
        assert float(res.rhs) <= float(res.lhs) + 1e-12


def test_example2_variable_lists():
    joint, dec = example2_joint(), example2_decoder()
    assert abs(error_probability(joint, dec).p_error - 0.25) < 1e-15
    ak = ahlswede_korner_bounds(joint, dec)
    assert abs(ak.conditional_entropy / math.log(2.0) - 2.1038) < 5e-4
    assert abs(ak.implied_PL_lower - 0.1206) < 5e-4
    assert abs(ak.implied_PL_lower_maxN - 0.0939) < 5e-4
    vb = variable_list_bound(joint, dec, gamma=1.25)
    assert abs(vb.bound - 0.25) < 1e-12
    assert vb.equality_diagnosis


def test_variable_list_gamma_scan_only_improves():
    joint, dec = example2_joint(), example2_decoder()
    base = variable_list_bound(joint, dec, gamma=1.0)
    scanned = variable_list_bound(joint, dec, gamma=1.0, scan_gamma=True)
    assert scanned.bound >= base.bound
    assert 1.0 <= scanned.gamma_star <= 5.0 / 3.0
    assert scanned.bound <= 0.25 + 1e-12
    with pytest.raises(ParameterError):
        variable_list_bound(joint, dec, gamma=0.5)


def test_decoder_shape_is_checked():
    dec = ListDecoder(lists=((0,), (1,), (2,)), alphabet_size=5)
    with pytest.raises(DimensionMismatchError):
        error_probability(example2_joint(), dec)


def test_product_joint_squares_the_error():
    joint = example1_joint()
    both = product_joint(joint, joint)
    assert (both.M, both.K) == (81, 4)
    assert abs(float(both.array.sum()) - 1.0) < 1e-12
    # a list of size 1 guessing each coordinate separately
    single = top_l_decoder(joint, 1)
    lists = tuple((a * 9 + b,) for a in (x[0] for x in single.lists) for b in (x[0] for x in single.lists))
    dec = ListDecoder(lists=lists, alphabet_size=81, size=1)
    assert abs(error_probability(both, dec).p_error - 0.75) < 1e-15
