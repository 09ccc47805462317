"""Gaussian full conditionals shared by the count and binary samplers.

Both samplers reduce, given their latent variables, to a weighted Gaussian
regression of a working response ``lam`` on ``X`` with precision weights
``omega``. This module computes the conditional moments of the coefficients
and the log marginal score that drives the inclusion updates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

__all__ = [
    "FactorizationError",
    "GaussianPrior",
    "PosteriorMoments",
    "weighted_gram",
    "moments_from_gram",
    "posterior_moments",
    "log_marginal_score",
]

WEIGHT_FLOOR = 1e-12
_JITTER_START = 1e-10
_JITTER_MAX = 1e-6


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


def _failed_pivot(A):
    # index of the first leading minor that is not positive definite
    for k in range(1, A.shape[0] + 1):
        try:
            np.linalg.cholesky(A[:k, :k])
        except np.linalg.LinAlgError:
            return k - 1
    return None


def _cholesky(A):
    """Lower Cholesky factor, adding diagonal jitter 1e-10 .. 1e-6 on failure."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.mean(np.abs(np.diag(A)))), 1.0)
    jitter = _JITTER_START
    while jitter <= _JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(A + jitter * scale * np.eye(A.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    pivot = _failed_pivot(A)
    raise FactorizationError(f"matrix is not positive definite (failed at pivot {pivot})", pivot=pivot)


@dataclass(frozen=True)
class GaussianPrior:
    """Gaussian prior ``N(mean, cov)`` on the full coefficient vector."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"prior covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T):
            raise ValueError("prior covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def isotropic(cls, dim: int, variance: float = 100.0, mean: float = 0.0) -> "GaussianPrior":
        return cls(np.full(dim, float(mean)), np.eye(dim) * float(variance))

    @property
    def dim(self) -> int:
        return self.mean.size

    @cached_property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.cov == np.diag(np.diag(self.cov))))

    @cached_property
    def precision(self) -> np.ndarray:
        if self.is_diagonal:
            return np.diag(1.0 / np.diag(self.cov))
        return cho_solve((_cholesky(self.cov), True), np.eye(self.dim))

    @cached_property
    def logdet(self) -> float:
        if self.is_diagonal:
            return float(np.sum(np.log(np.diag(self.cov))))
        return 2.0 * float(np.sum(np.log(np.diag(_cholesky(self.cov)))))

    @cached_property
    def quad(self) -> float:
        """``m' v^-1 m``."""
        return float(self.mean @ self.precision @ self.mean)

    def restrict(self, active) -> "GaussianPrior":
        """Marginal prior of the coefficients selected by ``active``."""
        idx = np.flatnonzero(np.asarray(active)) if np.asarray(active).dtype == bool else np.asarray(active, dtype=int)
        return GaussianPrior(self.mean[idx], self.cov[np.ix_(idx, idx)])


@dataclass(frozen=True)
class PosteriorMoments:
    """Conditional posterior ``N(mean, cov)`` with its cached factorization."""

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray  # lower factor of cov
    logdet: float  # log |cov|
    quad: float  # mean' cov^-1 mean

    @property
    def dim(self) -> int:
        return self.mean.size


def weighted_gram(X, omega, lam):
    """``(X' diag(omega) X, X' diag(omega) lam)`` with ``omega`` floored at 1e-12."""
    X = np.asarray(X, dtype=float)
    w = np.maximum(np.asarray(omega, dtype=float), WEIGHT_FLOOR)
    Xw = X * w[:, None]
    return Xw.T @ X, Xw.T @ np.asarray(lam, dtype=float)


def moments_from_gram(gram, rhs, prior: GaussianPrior) -> PosteriorMoments:
    """Posterior moments from precomputed weighted Gram matrix and right-hand side.

    ``gram``, ``rhs`` and ``prior`` must already be restricted to the same
    active columns.
    """
    p = prior.dim
    if p == 0:
        return PosteriorMoments(
            mean=np.zeros(0), cov=np.zeros((0, 0)), chol=np.zeros((0, 0)), logdet=0.0, quad=0.0
        )
    prec_prior = prior.precision
    A = gram + prec_prior
    A = 0.5 * (A + A.T)
    L = _cholesky(A)
    b = rhs + prec_prior @ prior.mean
    mean = cho_solve((L, True), b)
    # cov = A^-1 = L^-T L^-1
    Linv = solve_triangular(L, np.eye(p), lower=True)
    cov = Linv.T @ Linv
    cov = 0.5 * (cov + cov.T)
    chol_cov = _cholesky(cov)
    logdet = -2.0 * float(np.sum(np.log(np.diag(L))))
    Lt_mean = L.T @ mean
    quad = float(Lt_mean @ Lt_mean)
    return PosteriorMoments(mean=mean, cov=cov, chol=chol_cov, logdet=logdet, quad=quad)


def posterior_moments(X_active, omega, lam, prior: GaussianPrior) -> PosteriorMoments:
    """Moments of ``beta`` given working responses.

    ``V = (X' Omega X + v^-1)^-1`` and ``M = V (X' Omega lam + v^-1 m)``,
    computed through a Cholesky factorization of the precision. With zero
    active columns the result is the prior itself.
    """
    X_active = np.asarray(X_active, dtype=float)
    if X_active.ndim == 1:
        X_active = X_active[:, None]
    if X_active.shape[1] != prior.dim:
        raise ValueError(f"X has {X_active.shape[1]} columns but prior has dimension {prior.dim}")
    if X_active.shape[1] == 0:
        L = _cholesky(prior.cov) if prior.dim else np.zeros((0, 0))
        return PosteriorMoments(prior.mean.copy(), prior.cov.copy(), L, prior.logdet if prior.dim else 0.0,
                                prior.quad if prior.dim else 0.0)
    gram, rhs = weighted_gram(X_active, omega, lam)
    return moments_from_gram(gram, rhs, prior)


def log_marginal_score(moments: PosteriorMoments, prior: GaussianPrior) -> float:
    """Log marginal likelihood of an active set, up to a set-independent constant.

    ``-0.5 log|v| + 0.5 log|V| + 0.5 (M' V^-1 M - m' v^-1 m)``. Differences of
    this score between two active sets give the log ratio of their Gaussian
    marginal likelihoods.
    """
    if prior.dim == 0:
        return 0.0
    return 0.5 * (moments.logdet - prior.logdet) + 0.5 * (moments.quad - prior.quad)
