"""Marginal-likelihood estimators and selection of the number of components.

Three estimates of the log evidence come out of one trace: the renormalized
sum over the visited allocations, and two plug-ins of the same identity
``log p(y) = log p(y|z) + log p(z) - log p(z|y)`` evaluated at the modal
allocation, differing in which allocation-posterior estimate supplies the
denominator.  Posterior probabilities over the number of components follow
by a softmax against the model prior.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import AllocationTrace, FamilySpec, PriorSpec
from .engine import DEFAULT_QUADRATURE, ConditionalFitter, QuadratureConfig
from .posterior import (
    AllocationPosterior,
    CoverageDiagnostic,
    coverage_diagnostic,
    empirical_allocation_posterior,
    log_allocation_prior,
    renormalized_allocation_posterior,
    bma_marginal,
    weight_posterior_summary,
)
from .samplers import SamplerConfig, run_modal_gibbs

__all__ = [
    "log_evidence_I",
    "log_evidence_chib",
    "model_posterior_probs",
    "ComponentSummary",
    "ModelRow",
    "ModelComparisonReport",
    "select_k",
]

CHIB_GIBBS = "G"
CHIB_RENORMALIZED = "M"


def _class_log_joints(trace: AllocationTrace, alpha) -> dict:
    out = {}
    for key, entry in trace.table.items():
        fit = entry.fit
        out[key] = (fit.log_cond_evidence
                    + log_allocation_prior(fit.allocation.counts, alpha)
                    + fit.log_multiplicity)
    return out


def log_evidence_I(trace: AllocationTrace, alpha) -> float:
    """Evidence from summing the joint over the visited allocation set.

    A lower bound of the exact evidence: allocations never visited could only
    add mass.
    """
    if not trace.table:
        raise ValueError("empty trace")
    joints = np.array(list(_class_log_joints(trace, alpha).values()))
    return float(logsumexp(joints))


def log_evidence_chib(trace: AllocationTrace, alpha, variant: str = CHIB_GIBBS) -> float:
    """Evidence from the posterior-mode identity.

    ``variant="G"`` divides by the sampler's visit frequency of the modal
    allocation; ``variant="M"`` divides by its renormalized probability,
    which makes the result algebraically identical to :func:`log_evidence_I`.
    """
    if variant not in (CHIB_GIBBS, CHIB_RENORMALIZED):
        raise ValueError(f"unknown Chib variant {variant!r}")
    if not trace.table:
        raise ValueError("empty trace")
    if variant == CHIB_GIBBS:
        post = empirical_allocation_posterior(trace)
    else:
        post = renormalized_allocation_posterior(trace, alpha)
    zm = post.mode_key()
    denom = post.prob(zm)
    if denom <= 0.0:
        raise ValueError("Chib denominator zero")
    joints = _class_log_joints(trace, alpha)
    return float(joints[zm] - np.log(denom))


def model_posterior_probs(log_evidences: Sequence[float], model_priors: Optional[Sequence[float]] = None) -> np.ndarray:
    """Softmax of log evidence plus log model prior, with max-subtraction."""
    log_ev = np.asarray(log_evidences, dtype=float)
    if model_priors is None:
        log_prior = np.zeros_like(log_ev)
    else:
        priors = np.asarray(model_priors, dtype=float)
        if priors.shape != log_ev.shape:
            raise ValueError("one prior probability per model is required")
        if np.any(priors <= 0):
            raise ValueError("model priors must be positive")
        log_prior = np.log(priors)
    score = log_ev + log_prior
    score -= score.max()
    p = np.exp(score)
    return p / p.sum()


# ---------------------------------------------------------------------------
# model comparison report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentSummary:
    """Posterior summary of one mixture component under model averaging."""

    index: int
    weight_mean: float
    weight_sd: float
    location_mean: float
    location_sd: float
    location_mode: float
    precision_mean: Optional[float] = None
    precision_sd: Optional[float] = None
    precision_mode: Optional[float] = None


@dataclass(frozen=True)
class ModelRow:
    """All selection-relevant output for one number of components."""

    n_components: int
    log_evidence_I: float
    log_evidence_chib_G: float
    log_evidence_chib_M: float
    prob_I: float
    prob_G: float
    prob_M: float
    components: tuple
    diagnostic: CoverageDiagnostic
    trace: AllocationTrace
    runtime_ms: float


@dataclass(frozen=True)
class ModelComparisonReport:
    rows: tuple
    seed: int

    def best_row(self, estimator: str = "I") -> ModelRow:
        attr = {"I": "prob_I", "G": "prob_G", "M": "prob_M"}[estimator]
        return max(self.rows, key=lambda r: getattr(r, attr))


def select_k(y, family: FamilySpec, priors: PriorSpec, k_range: Sequence[int],
             config: SamplerConfig, quad: QuadratureConfig = DEFAULT_QUADRATURE,
             model_priors: Optional[Sequence[float]] = None,
             bma_posterior: str = "renormalized") -> ModelComparisonReport:
    """Fit every candidate number of components and compare their evidence.

    A single-component model needs one conditional fit and no sampling.  The
    averaged parameter summaries use the renormalized allocation posterior by
    default (``bma_posterior="gibbs"`` switches to visit frequencies).
    """
    k_values = sorted(set(int(k) for k in k_range))
    if not k_values:
        raise ValueError("k_range must not be empty")
    if k_values[0] < 1:
        raise ValueError("number of components must be at least one")

    rows = []
    for k in k_values:
        start = time.perf_counter()
        alpha = priors.alpha_vector(k)
        fitter = ConditionalFitter(y, family, priors, quad)
        if k == 1:
            trace = fitter.single_component_trace(config)
        else:
            trace = run_modal_gibbs(y, k, family, priors, config, quad, fitter=fitter)

        p_gibbs = empirical_allocation_posterior(trace)
        p_renorm = renormalized_allocation_posterior(trace, alpha)
        diag = coverage_diagnostic(p_gibbs, p_renorm)
        ev_i = log_evidence_I(trace, alpha)
        ev_g = log_evidence_chib(trace, alpha, CHIB_GIBBS)
        ev_m = log_evidence_chib(trace, alpha, CHIB_RENORMALIZED)

        mixing_post = p_renorm if bma_posterior == "renormalized" else p_gibbs
        summaries = _component_summaries(trace, mixing_post, alpha, family)
        runtime_ms = (time.perf_counter() - start) * 1000.0
        rows.append((k, ev_i, ev_g, ev_m, summaries, diag, trace, runtime_ms))

    prob_i = model_posterior_probs([r[1] for r in rows], model_priors)
    prob_g = model_posterior_probs([r[2] for r in rows], model_priors)
    prob_m = model_posterior_probs([r[3] for r in rows], model_priors)

    final = tuple(
        ModelRow(
            n_components=k,
            log_evidence_I=ev_i,
            log_evidence_chib_G=ev_g,
            log_evidence_chib_M=ev_m,
            prob_I=float(pi),
            prob_G=float(pg),
            prob_M=float(pm),
            components=summaries,
            diagnostic=diag,
            trace=trace,
            runtime_ms=runtime_ms,
        )
        for (k, ev_i, ev_g, ev_m, summaries, diag, trace, runtime_ms), pi, pg, pm
        in zip(rows, prob_i, prob_g, prob_m)
    )
    return ModelComparisonReport(rows=final, seed=config.seed)


def _component_summaries(trace: AllocationTrace, post: AllocationPosterior, alpha,
                         family: FamilySpec) -> tuple:
    k = alpha.size
    weights = weight_posterior_summary(trace, post, alpha)
    out = []
    for j in range(1, k + 1):
        loc = bma_marginal(trace, post, j, "location")
        loc_mean, loc_sd = loc.moments()
        if family.family == "gaussian":
            prec = bma_marginal(trace, post, j, "precision")
            prec_mean, prec_sd = prec.moments()
            prec_mode = _mixed_mode(trace, post, j, "precision")
        else:
            prec_mean = prec_sd = prec_mode = None
        out.append(ComponentSummary(
            index=j,
            weight_mean=float(weights.means[j - 1]),
            weight_sd=float(weights.sds[j - 1]),
            location_mean=float(loc_mean),
            location_sd=float(loc_sd),
            location_mode=_mixed_mode(trace, post, j, "location"),
            precision_mean=prec_mean,
            precision_sd=prec_sd,
            precision_mode=prec_mode,
        ))
    return tuple(out)


def _mixed_mode(trace: AllocationTrace, post: AllocationPosterior, component: int, parameter: str) -> float:
    """Conditional mode under the most probable allocation."""
    key = post.mode_key()
    comp = trace.table[key].fit.components[component - 1]
    return float(comp.location_mode if parameter == "location" else comp.precision_mode)
