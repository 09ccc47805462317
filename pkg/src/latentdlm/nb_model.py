"""Gibbs sampler for the negative binomial distributed-lag model.

Counts follow ``y_t ~ NB(xi, p_t)`` with ``p_t = logistic(eta_t)``, pmf
proportional to ``p^y (1 - p)^xi`` and mean ``xi p / (1 - p)``. One sweep:

1. Polya-Gamma latents ``omega_t ~ PG(y_t + xi, eta_t)``;
2. joint (gamma, beta) update on working responses ``(y_t - xi) / (2 omega_t)``;
3. Chinese-restaurant table counts ``psi_t`` and ``xi ~ Gamma(a0 + sum psi, b0 - sum log(1 - p_t))``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .distributions import PG_FLOOR, sample_gamma, sample_polya_gamma
from .gaussian_core import GaussianPrior, weighted_gram
from .lag_design import DesignMatrix
from .variable_selection import SelectionConfig, draw_beta, joint_update

__all__ = [
    "NBData",
    "NBState",
    "NBPriors",
    "RMatrix",
    "nb_linpred",
    "nb_prob",
    "update_omega_nb",
    "nb_working_response",
    "update_beta_nb",
    "build_R",
    "update_psi_xi",
    "nb_gibbs_sweep",
    "nb_loglik",
]

P_CLAMP = 1e-12


@dataclass(frozen=True)
class NBData:
    y: np.ndarray
    design: DesignMatrix

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size != self.design.X.shape[0]:
            raise ValueError(f"y has {y.size} entries but the design has {self.design.X.shape[0]} rows")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("negative binomial responses must be non-negative integers")
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def X(self) -> np.ndarray:
        return self.design.X


@dataclass(frozen=True)
class NBState:
    beta: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    xi: float
    psi: np.ndarray


@dataclass(frozen=True)
class NBPriors:
    coeff: GaussianPrior
    a0: float = 2.0
    b0: float = 1.0 / 50.0
    fixed_xi: float | None = None  # freezes xi (large values approximate Poisson)

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("gamma prior shape and rate must be positive")


def nb_linpred(beta, X) -> np.ndarray:
    return np.asarray(X) @ np.asarray(beta)


def nb_prob(eta) -> np.ndarray:
    """Logistic success probability, clamped to ``(1e-12, 1 - 1e-12)``."""
    eta = np.asarray(eta, dtype=float)
    p = np.empty_like(eta)
    pos = eta >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    p[~pos] = e / (1.0 + e)
    return np.clip(p, P_CLAMP, 1.0 - P_CLAMP)


def nb_loglik(y, xi, eta) -> np.ndarray:
    """Per-observation log pmf of ``NB(xi, logistic(eta))``."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    log_p = -np.logaddexp(0.0, -eta)
    log_1mp = -np.logaddexp(0.0, eta)
    return gammaln(y + xi) - gammaln(xi) - gammaln(y + 1.0) + y * log_p + xi * log_1mp


def update_omega_nb(state: NBState, data: NBData, rng: np.random.Generator) -> np.ndarray:
    eta = nb_linpred(state.beta, data.X)
    return sample_polya_gamma(data.y + state.xi, eta, rng)


def nb_working_response(y, xi, omega) -> np.ndarray:
    return (np.asarray(y, dtype=float) - xi) / (2.0 * np.maximum(omega, PG_FLOOR))


def update_beta_nb(state: NBState, data: NBData, priors: NBPriors, rng: np.random.Generator) -> np.ndarray:
    """Draw ``beta`` on the active columns from ``N(M_C, V_C)``; zeros elsewhere."""
    lam = nb_working_response(data.y, state.xi, state.omega)
    gram, rhs = weighted_gram(data.X, state.omega, lam)
    return draw_beta(gram, rhs, priors.coeff, state.gamma, rng)


class RMatrix:
    """Lower-triangular table-count matrix ``R[i, j] = |s(i, j)| xi^(j-1) / i!`` (1-based).

    Rows are held normalized together with their log scale, so the recursion
    never overflows; :attr:`entries` reconstructs the unnormalized values.
    """

    def __init__(self, ymax: int, xi: float):
        if ymax < 1:
            raise ValueError("ymax must be at least 1")
        if not xi > 0:
            raise ValueError("xi must be positive")
        self.ymax = int(ymax)
        self.xi_at_build = float(xi)
        rows = np.zeros((self.ymax, self.ymax))
        log_scale = np.zeros(self.ymax)
        rows[0, 0] = 1.0  # R[1, 1] = 1
        for i in range(2, self.ymax + 1):
            prev = rows[i - 2]
            cur = np.zeros(self.ymax)
            cur[: i - 1] += (i - 1) / i * prev[: i - 1]
            cur[1:i] += xi / i * prev[: i - 1]
            total = cur.sum()
            rows[i - 1] = cur / total
            log_scale[i - 1] = log_scale[i - 2] + np.log(total)
        self.probs = rows
        self.log_scale = log_scale
        self.cumprobs = np.cumsum(rows, axis=1)

    @property
    def entries(self) -> np.ndarray:
        return self.probs * np.exp(self.log_scale)[:, None]

    def __getitem__(self, ij):
        i, j = ij
        if i < 1 or j < 1 or j > i or i > self.ymax:
            return 0.0
        return float(self.probs[i - 1, j - 1] * np.exp(self.log_scale[i - 1]))

    def row_probs(self, y: int) -> np.ndarray:
        """Table-count probabilities for ``j = 1..y``."""
        return self.probs[y - 1, :y].copy()

    def sample(self, y, rng: np.random.Generator) -> np.ndarray:
        """Table counts for each count in ``y`` (zero counts give zero tables)."""
        y = np.asarray(y, dtype=np.int64)
        psi = np.zeros(y.shape, dtype=np.int64)
        pos = y > 0
        if np.any(pos):
            u = rng.random(int(pos.sum()))
            cum = self.cumprobs[y[pos] - 1]
            # cumulative row is 1 from column y on, so the count never exceeds y
            psi[pos] = 1 + np.minimum(np.sum(cum < u[:, None] * cum[:, -1:], axis=1), y[pos] - 1)
        return psi


def build_R(ymax: int, xi: float) -> RMatrix:
    return RMatrix(ymax, xi)


def update_psi_xi(state: NBState, data: NBData, priors: NBPriors, rng: np.random.Generator):
    """Draw table counts ``psi`` given ``xi``, then ``xi`` given ``psi`` and ``beta``.

    Returns
    -------
    psi : int ndarray
    xi : float
    """
    if priors.fixed_xi is not None:
        return state.psi, float(priors.fixed_xi)
    ymax = int(data.y.max()) if data.y.size else 0
    if ymax >= 1:
        psi = build_R(ymax, state.xi).sample(data.y, rng)
    else:
        psi = np.zeros(data.y.shape, dtype=np.int64)
    p = nb_prob(nb_linpred(state.beta, data.X))
    rate = priors.b0 - float(np.sum(np.log1p(-p)))
    if not np.isfinite(rate):
        raise FloatingPointError("non-finite rate in the xi update; success probabilities were not clamped")
    xi = float(sample_gamma(priors.a0 + psi.sum(), rate, rng))
    return psi, xi


def nb_gibbs_sweep(state: NBState, data: NBData, priors: NBPriors, selection: SelectionConfig,
                   rng: np.random.Generator) -> NBState:
    """omega -> (gamma, beta) -> (psi, xi)."""
    omega = update_omega_nb(state, data, rng)
    lam = nb_working_response(data.y, state.xi, omega)
    stats = weighted_gram(data.X, omega, lam)
    gamma, beta, _ = joint_update(state.beta, state.gamma, data.X, omega, lam, priors.coeff, selection, rng,
                                  stats=stats)
    state = replace(state, omega=omega, gamma=gamma, beta=beta)
    psi, xi = update_psi_xi(state, data, priors, rng)
    return replace(state, psi=psi, xi=xi)
