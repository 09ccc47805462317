import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from latentdlm.distributions import (
    RngStream,
    ald_cdf,
    ald_mean,
    ald_quantile,
    gig_half_mean,
    make_rng,
    pg_mean,
    pg_var,
    sample_ald,
    sample_gamma,
    sample_gig_half,
    sample_mvn,
    sample_polya_gamma,
    sample_truncated_ald,
)


def _pg_series_mean(b, c, terms=200_000):
    k = np.arange(1, terms + 1)
    return b / (2 * math.pi**2) * np.sum(1.0 / ((k - 0.5) ** 2 + c**2 / (4 * math.pi**2)))


def _pg_series_var(b, c, terms=200_000):
    k = np.arange(1, terms + 1)
    return b / (4 * math.pi**4) * np.sum(1.0 / ((k - 0.5) ** 2 + c**2 / (4 * math.pi**2)) ** 2)


def _gig_quad(chi2, delta2, power=1):
    def dens(x):
        return x ** -0.5 * np.exp(-0.5 * (chi2 / x + delta2 * x))

    peak = max(1.0, gig_half_mean(chi2, delta2))
    z = integrate.quad(dens, 0, 200 * peak, points=[peak], limit=400)[0]
    return integrate.quad(lambda x: x**power * dens(x), 0, 200 * peak, points=[peak], limit=400)[0] / z


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def test_same_stream_same_draws():
    a = RngStream(42, 3).generator().random(5)
    b = make_rng(42, 3).random(5)
    np.testing.assert_array_equal(a, b)


def test_streams_differ():
    assert not np.array_equal(make_rng(42, 0).random(5), make_rng(42, 1).random(5))


def test_samplers_bit_identical_under_same_stream():
    def run(rng):
        return np.concatenate([
            sample_polya_gamma(np.full(50, 3.7), np.linspace(-2, 2, 50), rng),
            sample_gig_half(np.linspace(0, 3, 50), 2.0, rng),
            sample_truncated_ald(np.linspace(-1, 1, 50), 1.0, 0.9, np.arange(50) % 2 == 0, rng),
        ])

    np.testing.assert_array_equal(run(make_rng(9, 2)), run(make_rng(9, 2)))


# ---------------------------------------------------------------------------
# Polya-Gamma
# ---------------------------------------------------------------------------


def test_pg_mean_examples():
    assert pg_mean(1.0, 0.0) == pytest.approx(0.25, abs=1e-15)
    assert pg_mean(2.0, 3.0) == pytest.approx(0.3017160845, rel=1e-9)
    assert pg_mean(2.0, 3.0) == pytest.approx(_pg_series_mean(2.0, 3.0), rel=1e-5)
    assert pg_mean(1.0, 0.0) == pytest.approx(_pg_series_mean(1.0, 0.0), rel=1e-5)


@settings(max_examples=50, deadline=None)
@given(b=st.floats(0.01, 100), c=st.floats(0, 30))
def test_pg_mean_even_in_c(b, c):
    assert pg_mean(b, -c) == pg_mean(b, c)


@pytest.mark.parametrize("b, c", [(1.0, 0.0), (1.0, 1e-4), (0.5, 2.0), (3.0, 7.0)])
def test_pg_var_matches_series(b, c):
    assert pg_var(b, c) == pytest.approx(_pg_series_var(b, c), rel=1e-5)


def test_pg_unit_shape_zero_tilt_band():
    draws = sample_polya_gamma(1.0, 0.0, make_rng(1), size=100_000)
    assert 0.2475 <= draws.mean() <= 0.2525


@pytest.mark.parametrize("b, c", [(51.0, 2.0), (0.3, 1.0), (1.7, 0.0), (3.0, -4.0), (12.25, 0.5)])
def test_pg_moments(b, c):
    draws = sample_polya_gamma(np.full(100_000, b), c, make_rng(2))
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(pg_mean(b, c), rel=0.01)
    assert draws.var() == pytest.approx(pg_var(b, c), rel=0.03)


def test_pg_additivity():
    rng = make_rng(3)
    whole = sample_polya_gamma(2.9, 1.5, rng, size=100_000)
    parts = sample_polya_gamma(1.2, 1.5, rng, size=100_000) + sample_polya_gamma(1.7, 1.5, rng, size=100_000)
    assert whole.mean() == pytest.approx(parts.mean(), rel=0.01)


def test_pg_rejects_nonpositive_shape():
    with pytest.raises(ValueError):
        sample_polya_gamma(0.0, 1.0, make_rng(0))
    with pytest.raises(ValueError):
        sample_polya_gamma(np.array([1.0, -2.0]), 1.0, make_rng(0))


def test_pg_shapes():
    rng = make_rng(4)
    assert np.ndim(sample_polya_gamma(1.0, 0.5, rng)) == 0
    assert sample_polya_gamma(1.0, 0.5, rng, size=(3, 2)).shape == (3, 2)
    assert sample_polya_gamma(np.ones(4), np.zeros(4), rng).shape == (4,)


# ---------------------------------------------------------------------------
# GIG(1/2)
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("chi2, delta2", [(4.0, 4.0), (0.0, 3.0), (1e-3, 2.0), (9.0, 0.5), (0.3, 12.0)])
def test_gig_closed_mean_matches_quadrature(chi2, delta2):
    assert gig_half_mean(chi2, delta2) == pytest.approx(_gig_quad(chi2, delta2), rel=1e-8)


@pytest.mark.parametrize("chi2, delta2", [(4.0, 4.0), (2.5, 1.0), (0.05, 8.0), (30.0, 2.2)])
def test_gig_sample_mean(chi2, delta2):
    draws = sample_gig_half(np.full(100_000, chi2), delta2, make_rng(5))
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(_gig_quad(chi2, delta2), rel=0.01)


def test_gig_zero_chi2_is_gamma_half():
    # Gamma(1/2, rate delta2/2): mean 1/delta2, variance 2/delta2^2
    draws = sample_gig_half(np.zeros(400_000), 4.0, make_rng(6))
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(0.25, rel=0.01)
    assert draws.var() == pytest.approx(2.0 / 16.0, rel=0.03)


def test_gig_reciprocal_moment():
    # 1/X ~ GIG(-1/2, delta2, chi2); compare E[1/X] with quadrature
    chi2, delta2 = 3.0, 2.0
    draws = sample_gig_half(np.full(200_000, chi2), delta2, make_rng(7))
    assert np.mean(1.0 / draws) == pytest.approx(_gig_quad(chi2, delta2, power=-1), rel=0.01)


def test_gig_rejects_bad_parameters():
    with pytest.raises(ValueError):
        sample_gig_half(-1.0, 1.0, make_rng(0))
    with pytest.raises(ValueError):
        sample_gig_half(1.0, 0.0, make_rng(0))


# ---------------------------------------------------------------------------
# asymmetric Laplace
# ---------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(mu=st.floats(-5, 5), sigma=st.floats(0.1, 5), q=st.floats(0.01, 0.99))
def test_ald_quantile_property(mu, sigma, q):
    assert ald_cdf(mu, mu, sigma, q) == pytest.approx(q, abs=1e-14)
    assert ald_quantile(q, mu, sigma, q) == pytest.approx(mu, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(1e-6, 1 - 1e-6), q=st.floats(0.01, 0.99), mu=st.floats(-3, 3))
def test_ald_round_trip(u, q, mu):
    assert ald_cdf(ald_quantile(u, mu, 1.3, q), mu, 1.3, q) == pytest.approx(u, abs=1e-12)


def test_ald_cdf_monotone_in_unit_interval():
    x = np.linspace(-200, 200, 20001)
    for q in (0.1, 0.5, 0.9):
        F = ald_cdf(x, 0.3, 1.0, q)
        assert np.all(np.diff(F) >= 0)
        assert np.all((F >= 0) & (F <= 1))
        assert 0 < ald_cdf(-5, 0, 1, q) < ald_cdf(5, 0, 1, q) < 1


def test_ald_quantile_range_check():
    with pytest.raises(ValueError):
        ald_quantile(1.0, 0, 1, 0.5)
    with pytest.raises(ValueError):
        ald_cdf(0.0, 0, 1, 1.0)


def test_sample_ald_moments():
    draws = sample_ald(0.5, 1.0, 0.9, make_rng(8), size=200_000)
    assert draws.mean() == pytest.approx(ald_mean(0.5, 1.0, 0.9), rel=0.01)
    assert np.mean(draws <= 0.5) == pytest.approx(0.9, abs=0.003)


def test_truncated_ald_support():
    rng = make_rng(9)
    mu = np.linspace(-30, 30, 100_000)
    pos = sample_truncated_ald(mu, 1.0, 0.9, True, rng)
    neg = sample_truncated_ald(mu, 1.0, 0.9, False, rng)
    assert pos.min() > 0
    assert neg.max() <= 0
    assert np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))


def test_truncated_ald_far_location_matches_untruncated_mean():
    draws = sample_truncated_ald(np.full(100_000, 20.0), 1.0, 0.5, True, make_rng(10))
    assert draws.mean() == pytest.approx(ald_mean(20.0, 1.0, 0.5), rel=0.01)


@pytest.mark.parametrize("mu, q, positive", [(0.0, 0.9, True), (-3.0, 0.9, True), (2.0, 0.3, False),
                                             (-0.5, 0.5, False), (4.0, 0.9, False)])
def test_truncated_ald_cdf(mu, q, positive):
    draws = np.sort(sample_truncated_ald(np.full(100_000, mu), 1.0, q, positive, make_rng(11)))
    f0 = ald_cdf(0.0, mu, 1.0, q)
    F = ald_cdf(draws, mu, 1.0, q)
    cdf = (F - f0) / (1 - f0) if positive else F / f0
    n = draws.size
    sup = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
    assert sup < 0.01


# ---------------------------------------------------------------------------
# gamma and Gaussian
# ---------------------------------------------------------------------------


def test_gamma_rate_parameterization():
    draws = sample_gamma(2.0, 1.0 / 50.0, make_rng(12), size=100_000)
    assert draws.mean() == pytest.approx(100.0, rel=0.01)


def test_gamma_rejects_bad_parameters():
    with pytest.raises(ValueError):
        sample_gamma(0.0, 1.0, make_rng(0))
    with pytest.raises(ValueError):
        sample_gamma(1.0, np.inf, make_rng(0))


def test_mvn_identity_covariance():
    rng = make_rng(13)
    draws = np.array([sample_mvn(np.zeros(3), np.eye(3), rng) for _ in range(100_000)])
    np.testing.assert_allclose(np.cov(draws.T), np.eye(3), atol=0.03)


def test_mvn_one_dimensional():
    a, b = make_rng(14), make_rng(14)
    assert sample_mvn(np.array([1.5]), np.array([[2.0]]), a)[0] == 1.5 + 2.0 * b.standard_normal()
