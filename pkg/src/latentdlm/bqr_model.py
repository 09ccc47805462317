"""Gibbs sampler for the binary quantile distributed-lag model.

``y_t = 1{y*_t > 0}`` with ``y*_t = x_t' beta + e_t`` and ``e_t ~ ALD(0, 1, q)``.
Writing the ALD error as ``psi nu_t + phi sqrt(nu_t) z_t`` with ``nu_t ~ Exp(1)``
makes the coefficients conditionally Gaussian. A sweep draws ``y*`` from its
truncated-ALD conditional with ``nu`` integrated out, then ``nu | y*`` from a
GIG(1/2) law, then (gamma, beta).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .distributions import sample_gig_half, sample_truncated_ald
from .gaussian_core import GaussianPrior, weighted_gram
from .lag_design import DesignMatrix
from .variable_selection import SelectionConfig, draw_beta, joint_update

__all__ = [
    "BQRData",
    "BQRConstants",
    "BQRState",
    "BQRPriors",
    "bqr_constants",
    "update_ystar",
    "update_nu",
    "bqr_working_response",
    "update_beta_bqr",
    "bqr_gibbs_sweep",
]


@dataclass(frozen=True)
class BQRData:
    y: np.ndarray
    design: DesignMatrix

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size != self.design.X.shape[0]:
            raise ValueError(f"y has {y.size} entries but the design has {self.design.X.shape[0]} rows")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("binary quantile responses must be 0 or 1")
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def X(self) -> np.ndarray:
        return self.design.X


@dataclass(frozen=True)
class BQRConstants:
    q: float
    ald_psi2: float
    phi2: float
    delta2: float
    ald_psi: float


@dataclass(frozen=True)
class BQRState:
    beta: np.ndarray
    gamma: np.ndarray
    ystar: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True)
class BQRPriors:
    coeff: GaussianPrior


def bqr_constants(q: float) -> BQRConstants:
    """Mixture constants of the ALD with skew ``q`` and unit scale."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile q must lie in (0, 1), got {q}")
    qq = q * (1.0 - q)
    psi = (1.0 - 2.0 * q) / qq
    phi2 = 2.0 / qq
    return BQRConstants(q=q, ald_psi2=psi * psi, phi2=phi2, delta2=2.0 + psi * psi / phi2, ald_psi=psi)


def update_ystar(state: BQRState, data: BQRData, constants: BQRConstants, rng: np.random.Generator) -> np.ndarray:
    """Truncated-ALD draws: positive where ``y = 1``, non-positive where ``y = 0``."""
    mu = data.X @ state.beta
    return sample_truncated_ald(mu, 1.0, constants.q, data.y == 1, rng)


def update_nu(state: BQRState, data: BQRData, constants: BQRConstants, rng: np.random.Generator) -> np.ndarray:
    resid = state.ystar - data.X @ state.beta
    chi2 = resid * resid / constants.phi2
    return sample_gig_half(chi2, constants.delta2, rng)


def bqr_working_response(ystar, nu, constants: BQRConstants):
    """Weights ``1 / (phi2 nu)`` and working response ``y* - psi nu``."""
    return 1.0 / (constants.phi2 * nu), ystar - constants.ald_psi * nu


def update_beta_bqr(state: BQRState, data: BQRData, constants: BQRConstants, priors: BQRPriors,
                    rng: np.random.Generator) -> np.ndarray:
    omega, lam = bqr_working_response(state.ystar, state.nu, constants)
    gram, rhs = weighted_gram(data.X, omega, lam)
    return draw_beta(gram, rhs, priors.coeff, state.gamma, rng)


def bqr_gibbs_sweep(state: BQRState, data: BQRData, constants: BQRConstants, priors: BQRPriors,
                    selection: SelectionConfig, rng: np.random.Generator) -> BQRState:
    """y* -> nu -> (gamma, beta)."""
    ystar = update_ystar(state, data, constants, rng)
    state = replace(state, ystar=ystar)
    nu = update_nu(state, data, constants, rng)
    omega, lam = bqr_working_response(ystar, nu, constants)
    stats = weighted_gram(data.X, omega, lam)
    gamma, beta, _ = joint_update(state.beta, state.gamma, data.X, omega, lam, priors.coeff, selection, rng,
                                  stats=stats)
    return replace(state, nu=nu, gamma=gamma, beta=beta)
