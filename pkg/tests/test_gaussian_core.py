import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from latentdlm.gaussian_core import (
    FactorizationError,
    GaussianPrior,
    _cholesky,
    log_marginal_score,
    posterior_moments,
)


def test_zero_active_columns_returns_prior():
    prior = GaussianPrior(np.zeros(0), np.zeros((0, 0)))
    mom = posterior_moments(np.zeros((5, 0)), np.ones(5), np.ones(5), prior)
    assert mom.mean.size == 0 and mom.cov.shape == (0, 0)
    assert log_marginal_score(mom, prior) == 0.0


def test_one_by_one_hand_values():
    mom = posterior_moments(np.array([[1.0]]), np.array([2.0]), np.array([3.0]), GaussianPrior([0.0], [[1.0]]))
    assert mom.cov[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert mom.mean[0] == pytest.approx(2.0, abs=1e-14)
    assert mom.logdet == pytest.approx(np.log(1.0 / 3.0), abs=1e-14)
    assert mom.quad == pytest.approx(2.0 * 2.0 * 3.0, abs=1e-12)


def test_diffuse_prior_gives_least_squares():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.standard_normal(50)
    mom = posterior_moments(X, np.ones(50), y, GaussianPrior.isotropic(3, 1e6))
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(mom.mean, ols, atol=1e-4)


def test_conjugate_linear_regression_oracle():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 3))
    y = rng.standard_normal(40)
    prior = GaussianPrior(np.array([0.2, -0.1, 1.0]), np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 4.0]]))
    vinv = np.linalg.inv(prior.cov)
    V = np.linalg.inv(X.T @ X + vinv)
    M = V @ (X.T @ y + vinv @ prior.mean)
    mom = posterior_moments(X, np.ones(40), y, prior)
    np.testing.assert_allclose(mom.mean, M, atol=1e-10)
    np.testing.assert_allclose(mom.cov, V, atol=1e-10)
    np.testing.assert_allclose(mom.chol @ mom.chol.T, V, atol=1e-10)
    assert mom.quad == pytest.approx(M @ np.linalg.solve(V, M), rel=1e-10)
    assert mom.quad >= 0


def _integrated_evidence(X, w, lam, prior):
    """Log of the integral of likelihood x prior over beta by numerical quadrature."""
    mom = posterior_moments(X, w, lam, prior)
    vinv = np.linalg.inv(prior.cov)

    def log_integrand(beta):
        r = lam - X @ beta
        d = beta - prior.mean
        return -0.5 * np.sum(w * r * r) - 0.5 * d @ vinv @ d

    ref = log_integrand(mom.mean)
    sd = np.sqrt(np.diag(mom.cov))
    lo, hi = mom.mean - 10 * sd, mom.mean + 10 * sd
    if X.shape[1] == 1:
        val = integrate.quad(lambda b: np.exp(log_integrand(np.array([b])) - ref), lo[0], hi[0],
                             epsabs=0, epsrel=1e-11)[0]
    else:
        val = integrate.dblquad(lambda b2, b1: np.exp(log_integrand(np.array([b1, b2])) - ref),
                                lo[0], hi[0], lo[1], hi[1], epsabs=0, epsrel=1e-10)[0]
    p = X.shape[1]
    # prior density normalizer (2 pi)^(-p/2) |v|^(-1/2)
    return ref + np.log(val) - 0.5 * p * np.log(2 * np.pi) - 0.5 * prior.logdet


@pytest.mark.parametrize("prior_mean", [(0.0, 0.0), (0.7, -1.2)])
def test_score_difference_matches_integrated_marginal_likelihood(prior_mean):
    rng = np.random.default_rng(2)
    n = 20
    X = rng.standard_normal((n, 2))
    w = rng.uniform(0.5, 2.0, n)
    lam = X @ [0.8, -0.4] + rng.standard_normal(n) / np.sqrt(w)
    full = GaussianPrior(np.array(prior_mean), np.array([[1.5, 0.2], [0.2, 0.8]]))
    small = full.restrict([0])
    s1 = log_marginal_score(posterior_moments(X[:, :1], w, lam, small), small)
    s2 = log_marginal_score(posterior_moments(X, w, lam, full), full)
    oracle = _integrated_evidence(X, w, lam, full) - _integrated_evidence(X[:, :1], w, lam, small)
    assert np.exp(s2 - s1) == pytest.approx(np.exp(oracle), rel=1e-6)


def test_score_with_zero_prior_mean_formula():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 2))
    prior = GaussianPrior.isotropic(2, 5.0)
    mom = posterior_moments(X, np.ones(30), rng.standard_normal(30), prior)
    expected = 0.5 * mom.logdet - 0.5 * prior.logdet + 0.5 * mom.quad
    assert log_marginal_score(mom, prior) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((25, 3))
    w = rng.uniform(0.1, 3, 25)
    lam = rng.standard_normal(25)
    prior = GaussianPrior.isotropic(3, 10.0)
    perm = rng.permutation(25)
    a = posterior_moments(X, w, lam, prior)
    b = posterior_moments(X[perm], w[perm], lam[perm], prior)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-10)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), t=st.integers(0, 19), bump=st.floats(0.1, 10))
def test_covariance_shrinks_as_weight_grows(seed, t, bump):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 3))
    w = rng.uniform(0.1, 3, 20)
    prior = GaussianPrior.isotropic(3, 10.0)
    before = posterior_moments(X, w, np.zeros(20), prior).cov
    w2 = w.copy()
    w2[t] += bump
    after = posterior_moments(X, w2, np.zeros(20), prior).cov
    assert np.linalg.eigvalsh(before - after).min() >= -1e-12


def test_prior_validation_and_diagonal_input():
    p = GaussianPrior([0.0, 1.0], [2.0, 3.0])
    np.testing.assert_array_equal(p.cov, np.diag([2.0, 3.0]))
    assert p.logdet == pytest.approx(np.log(6.0))
    assert p.quad == pytest.approx(1.0 / 3.0)
    with pytest.raises(ValueError):
        GaussianPrior([0.0, 0.0], np.ones((3, 3)))
    with pytest.raises(ValueError):
        GaussianPrior([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])


def test_cholesky_jitter_rescues_singular_gram():
    x = np.ones(5)
    A = np.outer(x, x)  # rank one, semidefinite
    L = _cholesky(A)
    np.testing.assert_allclose(L @ L.T, A, atol=1e-5)


def test_cholesky_reports_pivot():
    A = np.diag([1.0, 2.0, -1.0])
    with pytest.raises(FactorizationError) as exc:
        _cholesky(A)
    assert exc.value.pivot == 2
    assert "pivot 2" in str(exc.value)
