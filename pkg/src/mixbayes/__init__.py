"""Bayesian estimation of finite Gaussian location mixtures with an unknown number of components."""

from .core import (
    DEFAULT_L,
    AtomicMixture,
    Dataset,
    GaussianMixtureDensity,
    SeparationSpec,
    density,
    is_separated,
    log_density,
    point_mass,
    sample,
    separation_witness_for_ball,
)
from .estimators import (
    DPGaussianMixture,
    MAPGaussianMixture,
    MFMGaussianMixture,
    MomentGaussianMixture,
)
from .metrics import hellinger_sq, kl_divergence, wasserstein
from .moments import MomentVector, fit_mixture_from_moments, median_denoised_estimator, moment_vector
from .priors import ConfigError, DpPriorSpec, PriorSpec, k_prior_pmf
from .samplers import SamplerConfig, em_map, posterior_summaries, run_dp, run_mfm

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_L", "AtomicMixture", "Dataset", "GaussianMixtureDensity", "SeparationSpec",
    "density", "is_separated", "log_density", "point_mass", "sample", "separation_witness_for_ball",
    "DPGaussianMixture", "MAPGaussianMixture", "MFMGaussianMixture", "MomentGaussianMixture",
    "hellinger_sq", "kl_divergence", "wasserstein",
    "MomentVector", "fit_mixture_from_moments", "median_denoised_estimator", "moment_vector",
    "ConfigError", "DpPriorSpec", "PriorSpec", "k_prior_pmf",
    "SamplerConfig", "em_map", "posterior_summaries", "run_dp", "run_mfm",
]
