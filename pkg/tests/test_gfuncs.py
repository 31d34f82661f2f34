import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nanopnp import gfuncs
from nanopnp.errors import DomainError, NonPositiveG
from nanopnp.gfuncs import (
    Regime,
    evaluate,
    g1_large,
    g1_small,
    g1_smooth,
    g2_from_g1,
    g2_small,
    g_pair,
    lambda_switch,
    switching_weight,
)
from nanopnp.radial import g_oracle


def test_g1_large_examples():
    assert_allclose(g1_large(3.0, 50.0), 3148 / 2700 / 432, rtol=1e-12)
    assert_allclose(g1_large(3.0, 50.0), 2.699e-3, rtol=1e-3)
    assert_allclose(g1_large(1.0, 1e9), 1 / 48, rtol=1e-6)
    assert g1_large(1e4, 50.0) < 1e-9
    with pytest.raises(DomainError):
        g1_large(1.0, 0.0)


def test_g1_small_examples():
    assert_allclose(g1_small(0.1, 50.0), 0.3958068, atol=1e-7)
    assert g1_small(0.4, 0.0) == 0.5
    lam = np.array([0.01, 0.1, 0.7])
    beta = np.array([3.0, 50.0, 0.5])
    assert_allclose(g2_small(lam, beta) - g1_small(lam, beta), lam**2 * beta, rtol=1e-12)


def test_switching_weight():
    assert_allclose(lambda_switch(50.0), 0.294)
    assert_allclose(switching_weight(0.294, 50.0), 0.5)
    assert switching_weight(3.0, 50.0) > 1 - 1e-12
    assert switching_weight(0.02, 50.0) < 2e-3
    with pytest.raises(DomainError):
        switching_weight(0.5, -1.0)


def test_g1_smooth_limits():
    assert_allclose(g1_smooth(3.0, 50.0), g1_large(3.0, 50.0), rtol=1e-12)
    # S_w(0.02, 50) = 1.4e-3 still multiplies g1_large(0.1, 50) = 2.43
    assert_allclose(g1_smooth(0.02, 50.0), g1_small(0.02, 50.0), rtol=1e-2)
    with pytest.raises(DomainError):
        g1_smooth(0.5, 0.0)


@pytest.mark.parametrize("beta", [1.0, 5.0, 50.0, 500.0])
def test_g1_smooth_continuous_across_cutoff(beta):
    lam = np.linspace(0.09, 0.11, 20001)
    g = g1_smooth(lam, beta)
    assert np.max(np.abs(np.diff(g))) <= 1e-3 * g.min()


def test_g2_from_g1_examples():
    assert g2_from_g1(0.5, 0.3, 0.0) == 0.5
    assert_allclose(g2_from_g1(2.699e-3, 3.0, 50.0), 450.002699)
    assert_allclose(g2_from_g1(0.3958, 0.1, 50.0), 0.8958)
    with pytest.raises(NonPositiveG):
        g2_from_g1(0.01, 1.0, -1.0)


def test_g_pair_signs_and_closure():
    lam = np.array([0.05, 0.3, 2.0, 0.5])
    beta = np.array([20.0, -20.0, 0.0, 5.0])
    g1, g2 = g_pair(lam, beta)
    assert_allclose(g2 - g1, lam**2 * beta, rtol=1e-12, atol=1e-15)
    assert g1[2] == g2[2] == 0.5
    # mirror: G1(lam, -beta) = G2(lam, beta)
    m1, m2 = g_pair(lam[1], 20.0)
    assert_allclose(g1[1], m2)
    assert_allclose(g2[1], m1)


SAMPLED_LAMBDA = (0.02, 0.05, 0.1, 0.3, 0.5, 1.0, 3.0)
SAMPLED_BETA = (1.0, 5.0, 10.0, 50.0)


def test_monotone_in_beta_on_sampled_grid():
    lam = np.array(SAMPLED_LAMBDA)[:, None]
    g = g1_smooth(lam, np.array(SAMPLED_BETA)[None, :])
    assert np.all(np.diff(g, axis=1) <= 1e-9)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(0.01, 3.0), beta=st.floats(0.0, 200.0))
def test_closure_keeps_g2_above_g1(lam, beta):
    g1, g2 = g_pair(lam, beta)
    assert g2 >= g1 > 0


def test_regime_agreement_in_validity_windows():
    lam_large = np.array([1.0, 2.0, 3.0])
    lam_small = np.array([0.01, 0.02, 0.05])
    for beta in (50.0, 200.0):
        ref, _ = g_oracle(lam_large, np.full(3, beta), n_points=800)
        assert np.max(np.abs(g1_large(lam_large, beta) / ref - 1)) <= 0.10
        ref, _ = g_oracle(lam_small, np.full(3, beta), n_points=800)
        assert np.max(np.abs(g1_small(lam_small, beta) / ref - 1)) <= 0.10


def test_evaluate_regimes():
    assert evaluate(3.0, 50.0, Regime.LARGE_BETA).g1 == pytest.approx(g1_large(3.0, 50.0))
    assert evaluate(0.1, 50.0, Regime.SMALL_LAMBDA).g1 == pytest.approx(0.3958068, abs=1e-7)
    oracle = evaluate(0.1, 50.0, Regime.NUMERIC_ORACLE, n_points=1600)
    assert oracle.g1 == pytest.approx(0.401091, abs=5e-6)
    assert oracle.regime is Regime.NUMERIC_ORACLE
    assert gfuncs.Regime.LARGE_BETA.value == "LargeBetaOrder1Lambda"
