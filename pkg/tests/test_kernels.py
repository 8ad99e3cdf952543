import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mhrt.kernels import (
    NumericalError,
    _bartlett_factor,
    cholesky,
    conditional_regression,
    cov_to_corr,
    gamma_sample,
    invwishart_sample,
    make_rng,
    mvn_condition,
    mvn_sample,
    mvn_sample_many,
    spd_inverse,
    wishart_sample,
)

S = np.array([[2.0, 0.6, -0.3], [0.6, 1.0, 0.2], [-0.3, 0.2, 0.5]])


def test_make_rng_streams_reproducible_and_distinct():
    a = make_rng(7, 0).random(5)
    assert np.array_equal(a, make_rng(7, 0).random(5))
    assert not np.array_equal(a, make_rng(7, 1).random(5))
    assert not np.array_equal(a, make_rng(8, 0).random(5))


class TestCholesky:
    def test_plain(self):
        chol = cholesky(S)
        np.testing.assert_allclose(chol @ chol.T, S, atol=1e-14)

    def test_jitter_rescues_semidefinite(self):
        v = np.array([1.0, 2.0, 3.0])
        chol = cholesky(np.outer(v, v))
        assert np.all(np.isfinite(chol))

    def test_indefinite_raises(self):
        with pytest.raises(NumericalError):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_spd_inverse_symmetric(self):
        inv = spd_inverse(S)
        assert np.array_equal(inv, inv.T)
        np.testing.assert_allclose(inv @ S, np.eye(3), atol=1e-12)


def test_mvn_sample_uses_cholesky_of_cov():
    z = make_rng(1).standard_normal(3)
    x = mvn_sample(np.ones(3), S, make_rng(1))
    np.testing.assert_allclose(x, 1 + np.linalg.cholesky(S) @ z, rtol=1e-13)


def test_mvn_sample_many_moments():
    x = mvn_sample_many(np.zeros(3), S, 200_000, make_rng(2))
    np.testing.assert_allclose(np.cov(x.T), S, atol=0.02)


def test_mvn_condition_matches_precision_form():
    mean = np.array([0.5, -1.0, 2.0])
    m, c = mvn_condition(mean, S, [0], [1.5])
    # independent route: conditional precision is the free block of S^-1
    prec = np.linalg.inv(S)
    c_ref = np.linalg.inv(prec[1:, 1:])
    m_ref = mean[1:] - c_ref @ prec[1:, :1] @ np.array([1.5 - mean[0]])
    np.testing.assert_allclose(c, c_ref, rtol=1e-12)
    np.testing.assert_allclose(m, m_ref, rtol=1e-12)


def test_conditional_regression_indices():
    free, coef, cond = conditional_regression(S, [0, 2])
    assert free.tolist() == [1]
    assert coef.shape == (1, 2) and cond.shape == (1, 1)


def test_bartlett_factor_layout():
    a = _bartlett_factor(np.array([4.0, 9.0, 16.0]), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(
        a, [[2.0, 0.0, 0.0], [1.0, 3.0, 0.0], [2.0, 3.0, 4.0]])


def test_wishart_variate_consumption_order():
    df = 7.5
    rng = make_rng(3)
    chi2 = 2.0 * rng.standard_gamma((df - np.arange(3)) / 2.0)
    normals = rng.standard_normal(3)
    la = np.linalg.cholesky(S) @ _bartlett_factor(chi2, normals)
    np.testing.assert_allclose(wishart_sample(S, df, make_rng(3)), la @ la.T,
                               rtol=1e-12)


def test_wishart_and_inverse_wishart_means():
    rng = make_rng(4)
    df = 8.0
    w = np.mean([wishart_sample(S, df, rng) for _ in range(20_000)], axis=0)
    np.testing.assert_allclose(w, df * S, atol=0.08 * df)
    iw = np.mean([invwishart_sample(S, df, rng) for _ in range(20_000)], axis=0)
    np.testing.assert_allclose(iw, S / (df - 3 - 1), atol=0.02)


def test_wishart_df_guard():
    with pytest.raises(ValueError, match="degrees of freedom"):
        wishart_sample(S, 2.0, make_rng(0))


def test_inverse_wishart_one_dim_is_inverse_gamma():
    rng = make_rng(5)
    draws = [invwishart_sample([[3.0]], 5.0, rng)[0, 0] for _ in range(5000)]
    ks = stats.kstest(draws, stats.invgamma(2.5, scale=1.5).cdf)
    assert ks.pvalue > 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(3.0, 30.0))
def test_inverse_wishart_always_spd(seed, df):
    x = invwishart_sample(S, df, make_rng(seed))
    assert np.array_equal(x, x.T)
    assert np.all(np.linalg.eigvalsh(x) > 0)


def test_gamma_sample():
    rng = make_rng(6)
    x = gamma_sample(3.0, 2.0, rng, size=200_000)
    assert x.mean() == pytest.approx(1.5, rel=0.01)
    assert isinstance(gamma_sample(1.0, 1.0, rng), float)
    with pytest.raises(ValueError):
        gamma_sample(0.0, 1.0, rng)


def test_cov_to_corr():
    r = cov_to_corr(S)
    assert np.all(np.diag(r) == 1.0)
    assert r[0, 1] == pytest.approx(0.6 / np.sqrt(2.0))
    with pytest.raises(ValueError):
        cov_to_corr(np.diag([1.0, 0.0]))
