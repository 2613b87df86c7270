"""Scikit-learn style estimators wrapping the allocation samplers.

``BayesianMixture`` fits a fixed number of components; ``MixtureModelSelector``
fits a range and keeps the evidence comparison.  Both follow the usual
conventions: hyperparameters in ``__init__`` (so ``get_params`` and
``set_params`` work), fitted state in trailing-underscore attributes,
``predict_proba`` for component membership.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from scipy.special import logsumexp

from .core import FamilySpec, PriorSpec
from .engine import DEFAULT_QUADRATURE, ConditionalFitter
from .posterior import (
    bma_marginal,
    coverage_diagnostic,
    empirical_allocation_posterior,
    renormalized_allocation_posterior,
    weight_posterior_summary,
)
from .samplers import SamplerConfig, component_log_scores, run_modal_gibbs
from .selection import log_evidence_I, log_evidence_chib, select_k
from .validation import check_observations, check_k_range

__all__ = ["BayesianMixture", "MixtureModelSelector"]


class _MixtureParams:
    """Shared hyperparameter handling for both estimators."""

    def _family_spec(self) -> FamilySpec:
        return FamilySpec(
            family=self.family,
            shared_precision=self.shared_precision,
            poisson_prior_kind=self.poisson_prior,
        )

    def _prior_spec(self) -> PriorSpec:
        return PriorSpec(
            alpha=self.alpha,
            gaussian_mean_prior=(self.mean_loc, self.mean_precision),
            gaussian_precision_prior=(self.precision_shape, self.precision_rate),
            poisson_gamma_prior=(self.gamma_shape, self.gamma_rate),
            poisson_lognormal_prior=(self.log_mean_loc, self.log_mean_precision),
        )

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            burn_in=self.burn_in,
            iterations=self.iterations,
            thin=self.thin,
            seed=self.seed,
            init_strategy=self.init_strategy,
        )


class BayesianMixture(BaseEstimator, DensityMixin, _MixtureParams):
    """Finite mixture fitted by sampling the allocation posterior.

    Parameters mirror the prior and sampler configuration; see
    :class:`modalmix.PriorSpec` and :class:`modalmix.SamplerConfig` for
    semantics.  After ``fit`` the averaged posterior summaries are exposed as
    ``weights_``, ``means_``, ``precisions_`` (gaussian only) and their
    ``*_sd_`` companions, with components ordered by ascending location.
    """

    def __init__(self, n_components=2, family="gaussian", shared_precision=False,
                 poisson_prior="lognormal", alpha=2.0,
                 mean_loc=0.0, mean_precision=0.001,
                 precision_shape=0.5, precision_rate=0.5,
                 gamma_shape=1.0, gamma_rate=0.1,
                 log_mean_loc=0.0, log_mean_precision=0.001,
                 burn_in=200, iterations=10000, thin=10, seed=0,
                 init_strategy="quantile"):
        self.n_components = n_components
        self.family = family
        self.shared_precision = shared_precision
        self.poisson_prior = poisson_prior
        self.alpha = alpha
        self.mean_loc = mean_loc
        self.mean_precision = mean_precision
        self.precision_shape = precision_shape
        self.precision_rate = precision_rate
        self.gamma_shape = gamma_shape
        self.gamma_rate = gamma_rate
        self.log_mean_loc = log_mean_loc
        self.log_mean_precision = log_mean_precision
        self.burn_in = burn_in
        self.iterations = iterations
        self.thin = thin
        self.seed = seed
        self.init_strategy = init_strategy

    def fit(self, X, y=None):
        data = check_observations(X, self.family)
        family = self._family_spec()
        priors = self._prior_spec()
        config = self._sampler_config()
        k = int(self.n_components)
        fitter = ConditionalFitter(data, family, priors, DEFAULT_QUADRATURE)
        if k == 1:
            trace = fitter.single_component_trace(config)
        else:
            trace = run_modal_gibbs(data, k, family, priors, config, fitter=fitter)
        alpha = priors.alpha_vector(k)

        self.trace_ = trace
        self.allocation_posterior_ = renormalized_allocation_posterior(trace, alpha)
        self.sampler_posterior_ = empirical_allocation_posterior(trace)
        self.diagnostic_ = coverage_diagnostic(self.sampler_posterior_, self.allocation_posterior_)
        self.log_evidence_ = log_evidence_I(trace, alpha)
        self.log_evidence_chib_g_ = log_evidence_chib(trace, alpha, "G")

        w = weight_posterior_summary(trace, self.allocation_posterior_, alpha)
        self.weights_ = w.means
        self.weights_sd_ = w.sds
        means, means_sd = [], []
        precs, precs_sd = [], []
        for j in range(1, k + 1):
            loc = bma_marginal(trace, self.allocation_posterior_, j, "location")
            m, sd = loc.moments()
            means.append(m)
            means_sd.append(sd)
            if family.family == "gaussian":
                prec = bma_marginal(trace, self.allocation_posterior_, j, "precision")
                pm, psd = prec.moments()
                precs.append(pm)
                precs_sd.append(psd)
        self.means_ = np.asarray(means)
        self.means_sd_ = np.asarray(means_sd)
        if family.family == "gaussian":
            self.precisions_ = np.asarray(precs)
            self.precisions_sd_ = np.asarray(precs_sd)
        self.n_features_in_ = 1
        return self

    def _check_fitted(self):
        if not hasattr(self, "trace_"):
            raise RuntimeError("estimator is not fitted; call fit first")

    def _membership_log_scores(self, data: np.ndarray) -> np.ndarray:
        """Allocation-posterior average of the per-allocation membership probabilities."""
        family = self._family_spec()
        post = self.allocation_posterior_
        mixed = None
        for key, entry in self.trace_.table.items():
            p = post.prob(key)
            if p < 1e-12:
                continue
            fit = entry.fit
            locations = np.array([c.location_mode for c in fit.components])
            precisions = (np.array([c.precision_mode for c in fit.components])
                          if family.family == "gaussian" else None)
            scores = component_log_scores(data, fit.modal_weights, locations, precisions, family)
            scores = scores - logsumexp(scores, axis=1, keepdims=True)
            term = np.log(p) + scores
            mixed = term if mixed is None else np.logaddexp(mixed, term)
        return mixed

    def predict_proba(self, X):
        """Posterior component membership probabilities for new observations."""
        self._check_fitted()
        data = check_observations(X, self.family)
        return np.exp(self._membership_log_scores(data))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def score_samples(self, X):
        """Log predictive density under the model-averaged plug-in mixture."""
        self._check_fitted()
        data = check_observations(X, self.family)
        family = self._family_spec()
        post = self.allocation_posterior_
        mixed = None
        for key, entry in self.trace_.table.items():
            p = post.prob(key)
            if p < 1e-12:
                continue
            fit = entry.fit
            locations = np.array([c.location_mode for c in fit.components])
            precisions = (np.array([c.precision_mode for c in fit.components])
                          if family.family == "gaussian" else None)
            scores = component_log_scores(data, fit.modal_weights, locations, precisions, family)
            term = np.log(p) + logsumexp(scores, axis=1)
            mixed = term if mixed is None else np.logaddexp(mixed, term)
        return mixed

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class MixtureModelSelector(BaseEstimator, _MixtureParams):
    """Evidence-based selection of the number of mixture components.

    Fits every candidate in ``[k_min, k_max]`` and exposes the comparison as
    ``report_`` with posterior model probabilities under the three evidence
    estimates; ``best_k_`` maximizes the renormalized-evidence probability.
    """

    def __init__(self, k_min=1, k_max=5, family="gaussian", shared_precision=False,
                 poisson_prior="lognormal", alpha=2.0,
                 mean_loc=0.0, mean_precision=0.001,
                 precision_shape=0.5, precision_rate=0.5,
                 gamma_shape=1.0, gamma_rate=0.1,
                 log_mean_loc=0.0, log_mean_precision=0.001,
                 burn_in=200, iterations=10000, thin=10, seed=0,
                 init_strategy="quantile"):
        self.k_min = k_min
        self.k_max = k_max
        self.family = family
        self.shared_precision = shared_precision
        self.poisson_prior = poisson_prior
        self.alpha = alpha
        self.mean_loc = mean_loc
        self.mean_precision = mean_precision
        self.precision_shape = precision_shape
        self.precision_rate = precision_rate
        self.gamma_shape = gamma_shape
        self.gamma_rate = gamma_rate
        self.log_mean_loc = log_mean_loc
        self.log_mean_precision = log_mean_precision
        self.burn_in = burn_in
        self.iterations = iterations
        self.thin = thin
        self.seed = seed
        self.init_strategy = init_strategy

    def fit(self, X, y=None):
        data = check_observations(X, self.family)
        k_range = check_k_range(self.k_min, self.k_max)
        report = select_k(data, self._family_spec(), self._prior_spec(), k_range,
                          self._sampler_config())
        self.report_ = report
        self.probabilities_ = np.array([row.prob_I for row in report.rows])
        self.log_evidences_ = np.array([row.log_evidence_I for row in report.rows])
        self.k_values_ = np.array([row.n_components for row in report.rows])
        self.best_k_ = int(report.best_row("I").n_components)
        self.n_features_in_ = 1
        return self

    def best_estimator(self) -> BayesianMixture:
        """A ``BayesianMixture`` configured (not fitted) at the selected K."""
        if not hasattr(self, "best_k_"):
            raise RuntimeError("selector is not fitted; call fit first")
        params = self.get_params()
        params.pop("k_min")
        params.pop("k_max")
        return BayesianMixture(n_components=self.best_k_, **params)
