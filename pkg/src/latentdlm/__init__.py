"""Bayesian distributed-lag regression for count and binary responses.

Negative binomial counts are fitted through Polya-Gamma augmentation and binary
outcomes through an asymmetric-Laplace quantile link. Both samplers share a
Gaussian coefficient update and a Metropolis step over predictor inclusion.
"""
__version__ = "0.1.0"

from .bqr_model import BQRData, BQRPriors, BQRState, bqr_constants, bqr_gibbs_sweep
from .diagnostics import autocorrelation, hpd_interval, inefficiency_factor, posterior_summary
from .distributions import RngStream, make_rng, sample_gig_half, sample_polya_gamma
from .gaussian_core import GaussianPrior, posterior_moments
from .lag_design import LagSpec, assemble_design, bspline_basis, build_lag_matrix, place_knots
from .nb_model import NBData, NBPriors, NBState, build_R, nb_gibbs_sweep
from .simulation import SimConfig, simulate_dataset
from .variable_selection import SelectionConfig, joint_update

__all__ = [
    "__version__",
    "BQRData",
    "BQRPriors",
    "BQRState",
    "GaussianPrior",
    "LagSpec",
    "NBData",
    "NBPriors",
    "NBState",
    "RngStream",
    "SelectionConfig",
    "SimConfig",
    "assemble_design",
    "autocorrelation",
    "bqr_constants",
    "bqr_gibbs_sweep",
    "bspline_basis",
    "build_R",
    "build_lag_matrix",
    "hpd_interval",
    "inefficiency_factor",
    "joint_update",
    "make_rng",
    "nb_gibbs_sweep",
    "place_knots",
    "posterior_moments",
    "posterior_summary",
    "sample_gig_half",
    "sample_polya_gamma",
    "simulate_dataset",
]
