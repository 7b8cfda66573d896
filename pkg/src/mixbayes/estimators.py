"""Estimator wrappers with the scikit-learn ``fit`` / ``predict`` / ``get_params`` API.

All estimators take 1-D observations (a vector or a one-column matrix)
and expose the fitted mixing measure as ``mixture_``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observations, check_positive_int
from .core import DEFAULT_L, log_density
from .moments import fit_mixture_from_moments, median_denoised_estimator
from .priors import DpPriorSpec, PriorSpec
from .samplers.dp import run_dp
from .samplers.em import em_map
from .samplers.mfm import run_mfm
from .samplers.trace import SamplerConfig, posterior_summaries


class _MixtureEstimator(DensityMixin, BaseEstimator):
    def _responsibilities(self, X) -> np.ndarray:
        check_is_fitted(self, "mixture_")
        x = check_observations(X)
        nu = self.mixture_
        with np.errstate(divide="ignore"):
            logw = np.log(nu.weights)
        d = x[:, None] - nu.atoms[None, :]
        log_r = logw[None, :] - 0.5 * d * d
        return log_r - logsumexp(log_r, axis=1, keepdims=True)

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(self._responsibilities(X))

    def predict(self, X) -> np.ndarray:
        """Index of the most responsible atom (atoms sorted ascending)."""
        return np.argmax(self._responsibilities(X), axis=1)

    def score_samples(self, X) -> np.ndarray:
        check_is_fitted(self, "mixture_")
        return log_density(self.mixture_, check_observations(X))

    def score(self, X, y=None) -> float:
        return float(np.mean(self.score_samples(X)))

    @property
    def n_components_(self) -> int:
        check_is_fitted(self, "mixture_")
        return self.mixture_.k


def _sampler_config(est) -> SamplerConfig:
    return SamplerConfig(iterations=est.iterations, burn_in=est.burn_in, thin=est.thin,
                         seed=est.random_state, **(est.sampler_options or {}))


class MFMGaussianMixture(_MixtureEstimator):
    """Mixture of finite mixtures fitted by reversible-jump MCMC.

    Parameters
    ----------
    rate : str or float
        Schedule of the prior on ``k`` (``"1/n"``, ``"const:0.01"``, a number, ...).
    family : str
        Prior family on ``k``.
    alpha : float or None
        Fractional order; ``None`` runs the plain posterior.

    Attributes
    ----------
    mixture_ : AtomicMixture
        Highest-posterior visited state among those with the modal ``k``.
    k_pmf_ : dict
        Posterior pmf of the number of components.
    trace_ : PosteriorTrace
    """

    def __init__(self, rate="1/n", family="poisson", bound=DEFAULT_L, dirichlet=1.0,
                 alpha=1.0, iterations=21_000, burn_in=1_000, thin=20,
                 sampler_options=None, random_state=0):
        self.rate = rate
        self.family = family
        self.bound = bound
        self.dirichlet = dirichlet
        self.alpha = alpha
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.sampler_options = sampler_options
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_observations(X)
        prior = PriorSpec(family=self.family, rate=self.rate, L=self.bound, dirichlet=self.dirichlet)
        cfg = _sampler_config(self)
        cfg.alpha = self.alpha
        self.trace_ = run_mfm(x, prior, cfg)
        summary = posterior_summaries(self.trace_)
        self.k_pmf_ = summary.pmf
        self.k_mode_ = summary.mode
        self.mixture_ = summary.modal_mixture
        return self


class DPGaussianMixture(_MixtureEstimator):
    """Dirichlet-process mixture fitted by Neal's auxiliary-component sampler.

    Attributes
    ----------
    mixture_ : AtomicMixture
        Empirical mixing measure of the best visited state with the modal ``T_n``.
    T_pmf_ : dict
        Posterior pmf of the number of occupied clusters.
    trace_ : PosteriorTrace
    """

    def __init__(self, kappa="1/(n log n)", bound=DEFAULT_L, iterations=21_000,
                 burn_in=1_000, thin=20, sampler_options=None, random_state=0):
        self.kappa = kappa
        self.bound = bound
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.sampler_options = sampler_options
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_observations(X)
        self.trace_ = run_dp(x, DpPriorSpec(kappa=self.kappa, L=self.bound), _sampler_config(self))
        summary = posterior_summaries(self.trace_)
        self.T_pmf_ = summary.pmf
        self.T_mode_ = summary.mode
        self.mixture_ = summary.modal_mixture
        return self


class MAPGaussianMixture(_MixtureEstimator):
    """MAP fit with ``n_components`` atoms by EM with random restarts."""

    def __init__(self, n_components=1, dirichlet=1.0, bound=DEFAULT_L, n_restarts=10,
                 max_iter=500, tol=1e-8, random_state=0):
        self.n_components = n_components
        self.dirichlet = dirichlet
        self.bound = bound
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_observations(X)
        k = check_positive_int(self.n_components, "n_components")
        res = em_map(x, k, dirichlet=self.dirichlet, bound=self.bound, max_iter=self.max_iter,
                     tol=self.tol, n_restarts=self.n_restarts, seed=self.random_state)
        self.mixture_ = res.mixture
        self.log_posterior_ = res.log_posterior
        self.history_ = res.history
        self.n_iter_ = res.n_iter
        return self


class MomentGaussianMixture(_MixtureEstimator):
    """Denoised method of moments: median-of-batches moments, then Gauss quadrature."""

    def __init__(self, n_components=1, eta=None, bound=DEFAULT_L):
        self.n_components = n_components
        self.eta = eta
        self.bound = bound

    def fit(self, X, y=None):
        x = check_observations(X)
        k = check_positive_int(self.n_components, "n_components")
        self.moments_ = median_denoised_estimator(x, k, self.eta)
        self.mixture_ = fit_mixture_from_moments(self.moments_, k, self.bound)
        return self
