"""Random variate generators and closed-form helpers for the latent-variable samplers.

All samplers take an explicit :class:`numpy.random.Generator`. The Polya-Gamma
kernel is compiled with numba and consumes the same generator, so a fixed
``(seed, stream)`` pair always reproduces the same draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "RngStream",
    "make_rng",
    "pg_mean",
    "pg_var",
    "sample_polya_gamma",
    "sample_gig_half",
    "gig_half_mean",
    "ald_cdf",
    "ald_quantile",
    "ald_mean",
    "sample_ald",
    "sample_truncated_ald",
    "sample_gamma",
    "sample_mvn",
]

#: floor applied to Polya-Gamma draws before they are used as precision weights
PG_FLOOR = 1e-12
#: floor applied to the GIG ``chi2`` argument
CHI2_FLOOR = 1e-12
#: number of explicit terms in the sum-of-gammas series for fractional shapes
PG_SERIES_TERMS = 200

_TRUNC = 0.64
_PI2 = math.pi * math.pi


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream) pair naming an independent random stream."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Shorthand for ``RngStream(seed, stream).generator()``."""
    return RngStream(seed, stream).generator()


# ---------------------------------------------------------------------------
# Polya-Gamma
# ---------------------------------------------------------------------------


def pg_mean(b, c):
    """Mean of PG(b, c): ``b * tanh(c/2) / (2c)``, equal to ``b/4`` at ``c = 0``."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-6
    cs = np.where(small, 1.0, c)
    out = np.where(small, b * (0.25 - c * c / 48.0), b * np.tanh(cs / 2.0) / (2.0 * cs))
    return out[()] if out.ndim == 0 else out


def pg_var(b, c):
    """Variance of PG(b, c): ``b (sinh c - c) / (4 c^3 cosh^2(c/2))``, ``b/24`` at ``c = 0``."""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-3
    cs = np.where(small, 1.0, c)
    big = b * (np.sinh(cs) - cs) / (4.0 * cs**3 * np.cosh(cs / 2.0) ** 2)
    # Taylor expansion of the same expression about c = 0
    taylor = b * (1.0 / 24.0 - c * c / 240.0)
    out = np.where(small, taylor, big)
    return out[()] if out.ndim == 0 else out


@numba.njit(cache=True)
def _a_coef(n, x):
    k = (n + 0.5) * math.pi
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    expnt = -1.5 * (math.log(0.5 * math.pi) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
    return math.exp(expnt)


@numba.njit(cache=True)
def _log_norm_cdf(x):
    return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))


@numba.njit(cache=True)
def _texpon_mass(z):
    # probability of drawing from the exponential (right) piece of the proposal
    fz = 0.125 * _PI2 + 0.5 * z * z
    b = math.sqrt(1.0 / _TRUNC) * (_TRUNC * z - 1.0)
    a = -math.sqrt(1.0 / _TRUNC) * (_TRUNC * z + 1.0)
    x0 = math.log(fz) + fz * _TRUNC
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _rtigauss(z, rng):
    # inverse Gaussian IG(1/z, 1) truncated to (0, _TRUNC)
    x = _TRUNC + 1.0
    if z < 1.0 / _TRUNC:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / _TRUNC:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * _TRUNC
            x = _TRUNC / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > _TRUNC:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _pg1_devroye(z, fz, mass, rng):
    """One exact PG(1, 2z) draw by the alternating-series rejection sampler.

    ``fz`` and ``mass`` depend on ``z`` only and are precomputed by the caller.
    """
    while True:
        if rng.random() < mass:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _a_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _a_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _tail_sums(a, kmax):
    # midpoint-rule approximations of sum_{k > kmax} 1/d_k and 1/d_k^2 where
    # d_k = (k - 1/2)^2 + a^2; exact to O(kmax^-4) relative
    kk = float(kmax)
    if a == 0.0:
        return 1.0 / kk, 1.0 / (3.0 * kk**3)
    s1 = (0.5 * math.pi - math.atan(kk / a)) / a
    if a < 0.5 * kk:
        r = (a / kk) ** 2
        s2 = 0.0
        term = 1.0
        for n in range(40):
            s2 += (n + 1) * term / (2 * n + 3)
            term *= -r
        s2 /= kk**3
    else:
        s2 = (0.5 * math.pi - math.atan(kk / a)) / (2.0 * a**3) - kk / (2.0 * a * a * (kk * kk + a * a))
    return s1, s2


@numba.njit(cache=True)
def _pg_series(b, c, rng, kmax):
    """PG(b, c) by the truncated sum-of-gammas series plus a matched-moment gamma tail."""
    a2 = c * c / (4.0 * _PI2)
    total = 0.0
    for k in range(1, kmax + 1):
        d = (k - 0.5) ** 2 + a2
        total += rng.standard_gamma(b) / d
    s1, s2 = _tail_sums(math.sqrt(a2), kmax)
    tail_mean = b * s1
    tail_var = b * s2
    if tail_var > 0.0 and tail_mean > 0.0:
        shape = tail_mean * tail_mean / tail_var
        total += rng.standard_gamma(shape) * tail_var / tail_mean
    return total / (2.0 * _PI2)


@numba.njit(cache=True)
def _pg_fill(b, c, rng, kmax, out):
    for i in range(b.shape[0]):
        bi = b[i]
        n_int = int(math.floor(bi))
        frac = bi - n_int
        series_shape = 0.0
        if frac > 1e-12:
            # fold one unit into the series: shape >= 1 gammas are cheaper
            if n_int >= 1:
                n_int -= 1
                series_shape = 1.0 + frac
            else:
                series_shape = frac
        x = 0.0
        if n_int > 0:
            z = abs(c[i]) * 0.5
            fz = 0.125 * _PI2 + 0.5 * z * z
            mass = _texpon_mass(z)
            for _ in range(n_int):
                x += _pg1_devroye(z, fz, mass, rng)
        if series_shape > 0.0:
            x += _pg_series(series_shape, c[i], rng, kmax)
        out[i] = x


def sample_polya_gamma(b, c, rng: np.random.Generator, size=None):
    """Draw from the Polya-Gamma distribution PG(b, c).

    The integer part of ``b`` is handled exactly as a sum of PG(1, c) draws from
    the alternating-series rejection sampler. A fractional remainder ``f`` adds
    one draw of PG(1 + f, c) (or PG(f, c) when ``b < 1``) from a 200-term
    sum-of-gammas series whose omitted tail is replaced by a gamma variate with
    matching mean and variance.

    Parameters
    ----------
    b : float or array_like
        Shape, strictly positive (need not be an integer).
    c : float or array_like
        Tilting parameter. Broadcast against ``b``.
    rng : numpy.random.Generator
    size : int or tuple, optional
        Output shape when both parameters are scalars.

    Returns
    -------
    float or ndarray
    """
    b_arr = np.asarray(b, dtype=float)
    c_arr = np.asarray(c, dtype=float)
    shape = np.broadcast_shapes(b_arr.shape, c_arr.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, (size,) if np.isscalar(size) else tuple(size))
    bb = np.ascontiguousarray(np.broadcast_to(b_arr, shape), dtype=float).ravel()
    cc = np.ascontiguousarray(np.broadcast_to(c_arr, shape), dtype=float).ravel()
    if np.any(~(bb > 0)):
        raise ValueError("Polya-Gamma shape b must be strictly positive")
    if not np.all(np.isfinite(cc)):
        raise ValueError("Polya-Gamma tilt c must be finite")
    out = np.empty(bb.shape[0])
    _pg_fill(bb, cc, rng, PG_SERIES_TERMS, out)
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Generalized inverse Gaussian with index 1/2
# ---------------------------------------------------------------------------


def gig_half_mean(chi2, delta2):
    """Mean of the GIG(1/2) law with density ~ x^(-1/2) exp(-(chi2/x + delta2 x)/2).

    Closed form ``(1 + sqrt(chi2 * delta2)) / delta2``.
    """
    chi2 = np.asarray(chi2, dtype=float)
    delta2 = np.asarray(delta2, dtype=float)
    return (1.0 + np.sqrt(chi2 * delta2)) / delta2


def sample_gig_half(chi2, delta2, rng: np.random.Generator, size=None):
    """Draw from GIG(1/2, chi2, delta2), density ~ x^(-1/2) exp(-(chi2/x + delta2*x)/2).

    The reciprocal of such a variate is inverse Gaussian with mean
    ``sqrt(delta2/chi2)`` and shape ``delta2``. The Michael-Schucany-Haas
    construction is rearranged so the reciprocal is formed directly, which stays
    finite as ``chi2 -> 0`` where the law tends to Gamma(1/2, rate=delta2/2).
    """
    chi2 = np.asarray(chi2, dtype=float)
    delta2 = np.asarray(delta2, dtype=float)
    if np.any(chi2 < 0) or np.any(~(delta2 > 0)):
        raise ValueError("GIG(1/2) requires chi2 >= 0 and delta2 > 0")
    shape = np.broadcast_shapes(chi2.shape, delta2.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, (size,) if np.isscalar(size) else tuple(size))
    chi2 = np.maximum(np.broadcast_to(chi2, shape), CHI2_FLOOR)
    delta2 = np.broadcast_to(delta2, shape)

    s = np.sqrt(chi2)
    d = np.sqrt(delta2)
    nu = rng.standard_normal(shape) ** 2
    # x1 = 1 / (smaller MSH root); written to avoid cancellation
    x1 = s / d + nu / (2.0 * delta2) + np.sqrt(nu * s / (d * delta2) + nu * nu / (4.0 * delta2 * delta2))
    u = rng.random(shape)
    accept = u * (d * x1 + s) <= d * x1
    x = np.where(accept, x1, chi2 / (delta2 * x1))
    return x[()] if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Asymmetric Laplace
# ---------------------------------------------------------------------------


def _check_ald(sigma, q):
    if np.any(~(np.asarray(sigma) > 0)):
        raise ValueError("ALD scale sigma must be positive")
    qa = np.asarray(q)
    if np.any(~((qa > 0) & (qa < 1))):
        raise ValueError("ALD skew q must lie in (0, 1)")


def ald_cdf(x, mu=0.0, sigma=1.0, q=0.5):
    """CDF of the three-parameter asymmetric Laplace law; ``ald_cdf(mu) == q``."""
    _check_ald(sigma, q)
    u = (np.asarray(x, dtype=float) - mu) / sigma
    lower = q * np.exp((1.0 - q) * np.minimum(u, 0.0))
    upper = 1.0 - (1.0 - q) * np.exp(-q * np.maximum(u, 0.0))
    out = np.where(u < 0, lower, upper)
    return out[()] if out.ndim == 0 else out


def ald_quantile(p, mu=0.0, sigma=1.0, q=0.5):
    """Inverse of :func:`ald_cdf`."""
    _check_ald(sigma, q)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("probability must lie in (0, 1)")
    lo = mu + sigma / (1.0 - q) * np.log(np.minimum(p, q) / q)
    hi = mu - sigma / q * np.log((1.0 - np.maximum(p, q)) / (1.0 - q))
    out = np.where(p < q, lo, hi)
    return out[()] if out.ndim == 0 else out


def ald_mean(mu=0.0, sigma=1.0, q=0.5):
    return mu + sigma * (1.0 - 2.0 * q) / (q * (1.0 - q))


def sample_ald(mu, sigma, q, rng: np.random.Generator, size=None):
    """Untruncated ALD draws as a difference of scaled exponentials."""
    _check_ald(sigma, q)
    shape = np.shape(mu) if size is None else size
    e1 = rng.standard_exponential(shape)
    e2 = rng.standard_exponential(shape)
    return np.asarray(mu) + sigma * (e1 / q - e2 / (1.0 - q))


def sample_truncated_ald(mu, sigma, q, positive, rng: np.random.Generator):
    """Inversion draws from ALD(mu, sigma, q) restricted by sign.

    Where ``positive`` is true the draw is confined to ``(0, inf)``, elsewhere to
    ``(-inf, 0]``. The retained tail is inverted on the log scale so that a
    location far on the wrong side of zero still yields exact, finite draws.
    """
    _check_ald(sigma, q)
    mu = np.asarray(mu, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    shape = np.broadcast_shapes(mu.shape, positive.shape)
    mu = np.broadcast_to(mu, shape)
    positive = np.broadcast_to(positive, shape)
    u = rng.random(shape)
    log_u = np.log(u)
    m = mu / sigma

    # masses on either side of zero, each formed without cancellation
    log_s0 = np.where(m <= 0, math.log(1.0 - q) + q * m, np.log1p(-q * np.exp(-(1.0 - q) * np.maximum(m, 0.0))))
    log_f0 = np.where(m >= 0, math.log(q) - (1.0 - q) * m, np.log1p(-(1.0 - q) * np.exp(q * np.minimum(m, 0.0))))
    s0 = np.exp(log_s0)
    f0 = np.exp(log_f0)

    # positive side: survival target s = S(0) u, with 1 - s = F(0) + S(0)(1 - u)
    log_s = log_s0 + log_u
    x_up = mu - sigma / q * (log_s - math.log(1.0 - q))
    x_dn = mu + sigma / (1.0 - q) * np.log((f0 + s0 * (1.0 - u)) / q)
    x_pos = np.where(log_s <= math.log(1.0 - q), x_up, x_dn)
    # the retained interval is open at zero
    x_pos = np.where(x_pos > 0, x_pos, np.nextafter(0.0, 1.0))

    # negative side: cdf target f = F(0) u, with 1 - f = S(0) + F(0)(1 - u)
    log_f = log_f0 + log_u
    x_lo = mu + sigma / (1.0 - q) * (log_f - math.log(q))
    x_hi = mu - sigma / q * np.log((s0 + f0 * (1.0 - u)) / (1.0 - q))
    x_neg = np.minimum(np.where(log_f < math.log(q), x_lo, x_hi), 0.0)

    out = np.where(positive, x_pos, x_neg)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Gamma and Gaussian
# ---------------------------------------------------------------------------


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Gamma draws in the (shape, rate) parameterization."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)) or not np.all(np.isfinite(rate)):
        raise ValueError(f"gamma requires positive finite shape and rate, got {shape}, {rate}")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_mvn(mean, factor, rng: np.random.Generator):
    """Gaussian draw ``mean + factor @ z`` with ``factor @ factor.T`` the covariance."""
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal(mean.shape[0])
    return mean + np.asarray(factor) @ z
