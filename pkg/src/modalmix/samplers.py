"""Samplers over the allocation space.

``run_modal_gibbs`` draws only the allocation vector: each sweep fits the
conditional model at the current allocation, extracts the full-conditional
modes of the weights and component parameters, and resamples every label
from the plug-in categorical.  ``run_reference_gibbs`` is the classic
data-augmentation sampler used to validate the modal approximation, and
``enumerate_exact`` brute-forces the allocation posterior for small n.

All randomness flows through a counter-based Philox generator seeded from
the sampler configuration, so runs are bitwise reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import (
    Allocation,
    AllocationTrace,
    ConditionalFit,
    FamilySpec,
    PriorSpec,
    TraceEntry,
    allocation_counts,
    canonicalize,
)
from .engine import DEFAULT_QUADRATURE, ConditionalFitter, QuadratureConfig
from .posterior import AllocationPosterior, log_allocation_prior

__all__ = [
    "SamplerConfig",
    "make_rng",
    "init_allocation",
    "modal_sweep",
    "run_modal_gibbs",
    "run_reference_gibbs",
    "ParameterDraws",
    "enumerate_exact",
    "ExactEnumeration",
]

_LOG_2PI = math.log(2.0 * math.pi)

QUANTILE = "quantile"
RANDOM_UNIFORM = "random"

ENUMERATION_GUARD = 10_000_000


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length controls and the seed of the Philox stream."""

    burn_in: int = 200
    iterations: int = 10000
    thin: int = 10
    seed: int = 0
    init_strategy: str = QUANTILE

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not (self.iterations >= self.thin >= 1):
            raise ValueError("iterations >= thin >= 1 is required")
        if self.init_strategy not in (QUANTILE, RANDOM_UNIFORM):
            raise ValueError(f"unknown init strategy {self.init_strategy!r}")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(seed))


def init_allocation(y, n_components: int, strategy: str, rng: np.random.Generator) -> Allocation:
    """Starting allocation: quantile blocks of the sorted data, or uniform labels.

    The result is relabeled so component labels ascend with the component
    data means (empty components, possible under the uniform strategy, sort
    last).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n_components < 1:
        raise ValueError("need at least one component")
    if strategy == QUANTILE:
        if n_components > n:
            raise ValueError("more components than observations")
        base, rem = divmod(n, n_components)
        sizes = [base] * (n_components - rem) + [base + 1] * rem
        labels_sorted = np.repeat(np.arange(1, n_components + 1), sizes)
        z = np.empty(n, dtype=np.int64)
        z[np.argsort(y, kind="stable")] = labels_sorted
    elif strategy == RANDOM_UNIFORM:
        z = rng.integers(1, n_components + 1, size=n).astype(np.int64)
    else:
        raise ValueError(f"unknown init strategy {strategy!r}")

    alloc = Allocation.from_labels(z, n_components)
    counts = alloc.counts
    sums = np.bincount(z - 1, weights=y, minlength=n_components)
    means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    if np.any(counts == 0):
        means[counts == 0] = means[counts > 0].max() + 1.0  # empties sort last
    return canonicalize(alloc, means)


# ---------------------------------------------------------------------------
# plug-in categorical sweeps
# ---------------------------------------------------------------------------


def component_log_scores(y, weights, locations, precisions, family: FamilySpec) -> np.ndarray:
    """n-by-K matrix of log(weight_j) + log f_j(y_i | component j params)."""
    y = np.asarray(y, dtype=float)[:, None]
    w = np.asarray(weights, dtype=float)[None, :]
    loc = np.asarray(locations, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.log(w)
        if family.family == "gaussian":
            prec = np.asarray(precisions, dtype=float)[None, :]
            scores = 0.5 * (np.log(prec) - _LOG_2PI) - 0.5 * prec * (y - loc) ** 2
        else:
            loglam = np.log(loc)
            scores = y * loglam - loc - gammaln(y + 1.0)
            # a zero rate supports only zero counts
            scores = np.where(loc > 0, scores, np.where(y == 0, 0.0, -np.inf))
    return logw + scores


def _categorical_rows(log_scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row, computed with max-subtraction."""
    top = np.max(log_scores, axis=1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise ValueError("observation unsupported by all components")
    p = np.exp(log_scores - top)
    p /= p.sum(axis=1, keepdims=True)
    cdf = np.cumsum(p, axis=1)
    u = rng.random((log_scores.shape[0], 1))
    idx = (u > cdf).sum(axis=1)
    return np.minimum(idx, log_scores.shape[1] - 1).astype(np.int64) + 1


def modal_sweep(y, fit: ConditionalFit, family: FamilySpec, rng: np.random.Generator) -> Allocation:
    """Resample every label from the categorical built on the conditional modes.

    The modes are held fixed for the whole sweep; labels are conditionally
    independent given the modes.
    """
    locations = np.array([c.location_mode for c in fit.components])
    if family.family == "gaussian":
        precisions = np.array([c.precision_mode for c in fit.components])
    else:
        precisions = None
    scores = component_log_scores(y, fit.modal_weights, locations, precisions, family)
    z = _categorical_rows(scores, rng)
    return Allocation.from_labels(z, fit.allocation.n_components)


# ---------------------------------------------------------------------------
# modal Gibbs
# ---------------------------------------------------------------------------


def run_modal_gibbs(y, n_components: int, family: FamilySpec, priors: PriorSpec,
                    config: SamplerConfig, quad: QuadratureConfig = DEFAULT_QUADRATURE,
                    fitter: Optional[ConditionalFitter] = None) -> AllocationTrace:
    """Sample the allocation posterior with all other parameters at their modes.

    Each iteration fits the conditional model at the current allocation
    (memoized by canonical key), then redraws every label from the plug-in
    categorical.  Allocations are recorded after burn-in at the configured
    thinning, with their conditional fits attached.
    """
    y = np.asarray(y, dtype=float)
    retained = config.iterations // config.thin
    if retained == 0:
        raise ValueError("empty trace: no sweeps retained")
    if fitter is None:
        fitter = ConditionalFitter(y, family, priors, quad)
    _require_modal_alpha(priors, n_components)

    rng = make_rng(config.seed)
    alloc = init_allocation(y, n_components, config.init_strategy, rng)
    fit = fitter.fit_labels(alloc.z, n_components)

    visits = []
    table: dict = {}
    total = config.burn_in + config.iterations
    for t in range(1, total + 1):
        raw = modal_sweep(y, fit, family, rng)
        fit = fitter.fit_labels(raw.z, n_components)
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            key = fit.allocation.key
            entry = table.get(key)
            if entry is None:
                table[key] = TraceEntry(1, fit)
            else:
                entry.visit_count += 1
            visits.append(key)
    return AllocationTrace(visits=tuple(visits), table=table, config=config)


def _require_modal_alpha(priors: PriorSpec, n_components: int):
    alpha = priors.alpha_vector(n_components)
    if np.any(alpha <= 1.0):
        raise ValueError("mode undefined: modal sampling needs every Dirichlet concentration above one")


# ---------------------------------------------------------------------------
# reference collapsed Gibbs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterDraws:
    """Retained parameter draws from the reference sampler, canonical labels."""

    weights: np.ndarray     # (retained, K)
    locations: np.ndarray   # (retained, K)
    precisions: Optional[np.ndarray]  # (retained, K) for gaussian, else None


def run_reference_gibbs(y, n_components: int, family: FamilySpec, priors: PriorSpec,
                        config: SamplerConfig, quad: QuadratureConfig = DEFAULT_QUADRATURE,
                        fitter: Optional[ConditionalFitter] = None):
    """Classic data-augmentation sampler retained for validation.

    The scan is weights -> labels -> component parameters, with component
    parameters drawn from their conditional posteriors given the allocation:
    exact draws where conjugacy allows, inverse-CDF draws on the engine's
    grids otherwise.  Returns the allocation trace plus the raw parameter
    draws for moment cross-checks.
    """
    y = np.asarray(y, dtype=float)
    retained = config.iterations // config.thin
    if retained == 0:
        raise ValueError("empty trace: no sweeps retained")
    if fitter is None:
        fitter = ConditionalFitter(y, family, priors, quad)
    alpha = priors.alpha_vector(n_components)

    rng = make_rng(config.seed)
    alloc = init_allocation(y, n_components, config.init_strategy, rng)
    fit = fitter.fit_labels(alloc.z, n_components)
    locations = np.array([c.location_mode for c in fit.components])
    precisions = (np.array([c.precision_mode for c in fit.components])
                  if family.family == "gaussian" else None)
    weights = np.asarray(fit.modal_weights, dtype=float)

    visits = []
    table: dict = {}
    w_rows, loc_rows, prec_rows = [], [], []
    total = config.burn_in + config.iterations
    for t in range(1, total + 1):
        scores = component_log_scores(y, weights, locations, precisions, family)
        z = _categorical_rows(scores, rng)
        fit = fitter.fit_labels(z, n_components)
        z = fit.allocation.z
        locations, precisions = _draw_component_params(y, z, fit, family, priors, rng)
        weights = rng.dirichlet(alpha + fit.allocation.counts)
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            key = fit.allocation.key
            entry = table.get(key)
            if entry is None:
                table[key] = TraceEntry(1, fit)
            else:
                entry.visit_count += 1
            visits.append(key)
            w_rows.append(weights.copy())
            loc_rows.append(locations.copy())
            if precisions is not None:
                prec_rows.append(precisions.copy())
    trace = AllocationTrace(visits=tuple(visits), table=table, config=config)
    draws = ParameterDraws(
        weights=np.asarray(w_rows),
        locations=np.asarray(loc_rows),
        precisions=np.asarray(prec_rows) if prec_rows else None,
    )
    return trace, draws


def _draw_component_params(y, z, fit: ConditionalFit, family: FamilySpec, priors: PriorSpec,
                           rng: np.random.Generator):
    k = fit.allocation.n_components
    counts = fit.allocation.counts.astype(float)
    sums = np.bincount(z - 1, weights=y, minlength=k)

    if family.family == "gaussian":
        m0, p0 = priors.gaussian_mean_prior
        if family.shared_precision:
            tau = float(fit.components[0].precision_marginal.sample(rng))
            taus = np.full(k, tau)
        else:
            taus = np.array([float(c.precision_marginal.sample(rng)) for c in fit.components])
        denom = p0 + counts * taus
        mus = rng.normal((p0 * m0 + taus * sums) / denom, 1.0 / np.sqrt(denom))
        return mus, taus

    if family.poisson_prior_kind == "gamma":
        a, b = priors.poisson_gamma_prior
        lams = rng.gamma(a + sums, 1.0 / (b + counts))
        return lams, None

    lams = np.array([float(c.location_marginal.sample(rng)) for c in fit.components])
    return lams, None


# ---------------------------------------------------------------------------
# exact enumeration oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactEnumeration:
    """Exact allocation posterior and evidence from full enumeration."""

    log_evidence: float
    posterior: AllocationPosterior
    table: dict  # canonical key -> ConditionalFit


def enumerate_exact(y, n_components: int, family: FamilySpec, priors: PriorSpec,
                    quad: QuadratureConfig = DEFAULT_QUADRATURE, n_limit: int = 12,
                    fitter: Optional[ConditionalFitter] = None) -> ExactEnumeration:
    """Evaluate the joint over every label vector and collapse canonically.

    The exact evidence sums over all K^n label vectors; the posterior is
    aggregated over canonical allocations consistently with the samplers.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n > n_limit or n_components ** n > ENUMERATION_GUARD:
        raise ValueError("enumeration too large")
    if fitter is None:
        fitter = ConditionalFitter(y, family, priors, quad)
    alpha = priors.alpha_vector(n_components)

    joint_by_key: dict = {}
    table: dict = {}
    all_joints = []
    for labels in itertools.product(range(1, n_components + 1), repeat=n):
        z = np.asarray(labels, dtype=np.int64)
        fit = fitter.fit_labels(z, n_components)
        micro_prior = log_allocation_prior(allocation_counts(z, n_components), alpha)
        joint = fit.log_cond_evidence + micro_prior
        all_joints.append(joint)
        key = fit.allocation.key
        joint_by_key.setdefault(key, []).append(joint)
        table.setdefault(key, fit)

    log_evidence = float(logsumexp(np.asarray(all_joints)))
    entries = {
        key: float(np.exp(logsumexp(np.asarray(vals)) - log_evidence))
        for key, vals in joint_by_key.items()
    }
    total = sum(entries.values())
    entries = {key: p / total for key, p in entries.items()}
    posterior = AllocationPosterior(entries=entries, estimator_tag="exact")
    return ExactEnumeration(log_evidence=log_evidence, posterior=posterior, table=table)
