"""Allocation posteriors and Bayesian model averaging.

Two estimators of the allocation posterior come out of a trace: the visit
frequencies of the sampler, and the renormalized joint (conditional evidence
times allocation prior) over the visited set.  Comparing them is the
coverage diagnostic; averaging the per-allocation conditional marginals
under either gives the unconditional parameter marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import AllocationTrace, GammaDensity, GridDensity

__all__ = [
    "AllocationPosterior",
    "log_allocation_prior",
    "empirical_allocation_posterior",
    "renormalized_allocation_posterior",
    "bma_marginal",
    "weight_posterior_summary",
    "WeightPosterior",
    "coverage_diagnostic",
    "CoverageDiagnostic",
]

GIBBS_FREQUENCY = "gibbs_frequency"
EVIDENCE_RENORMALIZED = "evidence_renormalized"

_SUPPORT_CAP = 20001
_MIX_FLOOR = 1e-12


@dataclass(frozen=True)
class AllocationPosterior:
    """Probabilities over canonical allocation keys; sums to one."""

    entries: dict
    estimator_tag: str

    def __post_init__(self):
        total = sum(self.entries.values())
        if self.entries and abs(total - 1.0) > 1e-9:
            raise ValueError(f"allocation posterior sums to {total}, not 1")
        if any(p < 0 for p in self.entries.values()):
            raise ValueError("allocation probabilities must be non-negative")

    def prob(self, key: bytes) -> float:
        return self.entries.get(key, 0.0)

    def mode_key(self) -> bytes:
        """Most probable key; ties break toward the lexicographically smallest."""
        if not self.entries:
            raise ValueError("empty trace")
        best = max(self.entries.values())
        return min(k for k, p in self.entries.items() if p == best)


def log_allocation_prior(counts, alpha) -> float:
    """Log prior of one label vector with the weights integrated out."""
    counts = np.asarray(counts, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("invalid prior: Dirichlet concentrations must be positive")
    a_sum = float(alpha.sum())
    n = float(counts.sum())
    return float(gammaln(a_sum) - gammaln(alpha).sum() + gammaln(counts + alpha).sum() - gammaln(n + a_sum))


def empirical_allocation_posterior(trace: AllocationTrace) -> AllocationPosterior:
    """Visit frequencies of the retained sweeps."""
    total = trace.total_visits
    if total == 0:
        raise ValueError("empty trace")
    entries = {key: entry.visit_count / total for key, entry in trace.table.items()}
    return AllocationPosterior(entries=entries, estimator_tag=GIBBS_FREQUENCY)


def renormalized_allocation_posterior(trace: AllocationTrace, alpha) -> AllocationPosterior:
    """Joint mass renormalized over the visited set.

    Each recorded allocation is canonical, so its prior mass counts every
    labeling collapsed into it (the Dirichlet-multinomial prior of one
    labeling times the collapsed labeling count).
    """
    if not trace.table:
        raise ValueError("empty trace")
    keys = list(trace.table.keys())
    log_joint = np.array([_log_class_joint(trace.table[k].fit, alpha) for k in keys])
    if not np.all(np.isfinite(log_joint)):
        raise ValueError("non-finite conditional evidence in trace")
    probs = np.exp(log_joint - logsumexp(log_joint))
    probs /= probs.sum()
    entries = dict(zip(keys, probs.tolist()))
    return AllocationPosterior(entries=entries, estimator_tag=EVIDENCE_RENORMALIZED)


def _log_class_joint(fit, alpha) -> float:
    return fit.log_cond_evidence + log_allocation_prior(fit.allocation.counts, alpha) + fit.log_multiplicity


def bma_marginal(trace: AllocationTrace, post: AllocationPosterior, component: int,
                 parameter: str = "location") -> GridDensity:
    """Model-averaged marginal of one component parameter.

    Mixes the per-allocation conditional marginals with the allocation
    posterior, re-interpolating every marginal onto the union of the
    source supports (zero density outside each source range).
    """
    if parameter not in ("location", "precision"):
        raise ValueError(f"unknown parameter {parameter!r}")
    picked = []
    for key, entry in trace.table.items():
        p = post.prob(key)
        if p < _MIX_FLOOR:
            continue
        comps = entry.fit.components
        if not (1 <= component <= len(comps)):
            raise ValueError("component index out of range")
        comp = comps[component - 1]
        marginal = comp.location_marginal if parameter == "location" else comp.precision_marginal
        if marginal is None:
            raise ValueError("component has no precision parameter")
        picked.append((math.log(p), marginal))
    if not picked:
        raise ValueError("no allocation carries weight above the mixing floor")

    supports = [m.support if isinstance(m, GridDensity) else m.as_grid().support for _, m in picked]
    union = np.unique(np.concatenate(supports))
    if union.size > _SUPPORT_CAP:
        union = union[np.round(np.linspace(0, union.size - 1, _SUPPORT_CAP)).astype(int)]

    stack = np.stack([lp + m.log_pdf(union) for lp, m in picked])
    with np.errstate(invalid="ignore"):
        log_mix = logsumexp(stack, axis=0)
    return GridDensity.from_log(union, log_mix)


@dataclass(frozen=True)
class WeightPosterior:
    """Mixture-of-Dirichlet summary of the weight posterior."""

    means: np.ndarray
    sds: np.ndarray
    marginals: tuple  # per-component GridDensity on (0, 1)


def weight_posterior_summary(trace: AllocationTrace, post: AllocationPosterior, alpha,
                             grid_points: int = 513) -> WeightPosterior:
    """Exact moments and marginal grids of the weight posterior.

    Given the allocation, the weights are Dirichlet; averaging over the
    allocation posterior yields a Dirichlet mixture whose moments are exact
    and whose single-weight marginals are Beta mixtures.
    """
    if not trace.table:
        raise ValueError("empty trace")
    alpha = np.asarray(alpha, dtype=float)
    k = alpha.size

    probs, shapes = [], []
    for key, entry in trace.table.items():
        p = post.prob(key)
        if p <= 0:
            continue
        probs.append(p)
        shapes.append(alpha + entry.fit.allocation.counts)
    probs = np.asarray(probs)
    shapes = np.asarray(shapes)          # (m, K)
    totals = shapes.sum(axis=1)          # (m,)

    means_z = shapes / totals[:, None]
    vars_z = means_z * (1.0 - means_z) / (totals[:, None] + 1.0)
    means = probs @ means_z
    second = probs @ (vars_z + means_z ** 2)
    sds = np.sqrt(np.maximum(second - means ** 2, 0.0))

    w = np.linspace(0.0, 1.0, grid_points)
    marginals = []
    for j in range(k):
        a_j = shapes[:, j][:, None]
        b_j = (totals - shapes[:, j])[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            log_beta = (
                gammaln(a_j + b_j) - gammaln(a_j) - gammaln(b_j)
                + (a_j - 1.0) * np.log(w[None, :])
                + (b_j - 1.0) * np.log1p(-w[None, :])
            )
        log_beta = np.where(np.isnan(log_beta), -np.inf, log_beta)
        log_mix = logsumexp(np.log(probs)[:, None] + log_beta, axis=0)
        marginals.append(GridDensity.from_log(w, log_mix))
    return WeightPosterior(means=means, sds=sds, marginals=tuple(marginals))


@dataclass(frozen=True)
class CoverageDiagnostic:
    """Total-variation comparison of the two allocation posterior estimates."""

    tv_distance: float
    flagged: bool
    per_entry: dict  # key -> (sampler prob, renormalized prob, log ratio)


def coverage_diagnostic(p_gibbs: AllocationPosterior, p_renorm: AllocationPosterior,
                        threshold: float = 0.1) -> CoverageDiagnostic:
    """Flag a sampler whose visit frequencies disagree with the renormalized joint."""
    keys = set(p_gibbs.entries) | set(p_renorm.entries)
    tv = 0.0
    per_entry = {}
    for key in sorted(keys):
        pg = p_gibbs.prob(key)
        pr = p_renorm.prob(key)
        tv += abs(pg - pr)
        if pg > 0 and pr > 0:
            ratio = math.log(pg / pr)
        elif pg == pr:
            ratio = 0.0
        else:
            ratio = math.inf if pg > pr else -math.inf
        per_entry[key] = (pg, pr, ratio)
    tv *= 0.5
    return CoverageDiagnostic(tv_distance=tv, flagged=tv > threshold, per_entry=per_entry)
