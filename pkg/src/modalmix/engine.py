"""Conditional posterior engine.

Given a fixed allocation of observations to components, every quantity of
interest is available in closed form or by one-dimensional quadrature:

* Poisson components with a Gamma prior are fully conjugate.
* Poisson components with a Gaussian prior on the log mean are handled by
  safeguarded Newton for the mode plus Simpson quadrature on an adaptive,
  mode-centered grid over the log mean.
* Gaussian components integrate the mean analytically for any fixed
  precision, then integrate the precision numerically on a mode-centered
  log-precision grid (either one grid per component or a single shared grid
  when all components share their precision).

The :class:`ConditionalFitter` memoizes component posteriors by sufficient
statistics and assembled fits by canonical allocation key, so samplers that
revisit allocations never refit.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp

from .core import (
    Allocation,
    AllocationTrace,
    ComponentPosterior,
    ConditionalFit,
    FamilySpec,
    GammaDensity,
    GridDensity,
    PriorSpec,
    QuadratureError,
    TraceEntry,
    canonical_permutation,
    canonicalize,
    log_canonical_multiplicity,
)

__all__ = [
    "QuadratureConfig",
    "DEFAULT_QUADRATURE",
    "gaussian_evidence_given_tau",
    "fit_poisson_gamma",
    "fit_poisson_lognormal",
    "fit_gaussian_component",
    "fit_gaussian_shared_precision",
    "dirichlet_mode",
    "conditional_fit",
    "ConditionalFitter",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    """Grid controls for the one-dimensional posterior integrations.

    ``grid_size`` must be odd (Simpson rule); ``log_range_halfwidth`` is the
    half width of the grid in units of the posterior log-scale standard
    deviation; ``refinement`` is the number of mode-centered re-grid passes.
    """

    grid_size: int = 201
    log_range_halfwidth: float = 8.0
    refinement: int = 2

    def __post_init__(self):
        if self.grid_size < 21 or self.grid_size % 2 == 0:
            raise ValueError("grid_size must be odd and at least 21")
        if not self.log_range_halfwidth > 0:
            raise ValueError("log_range_halfwidth must be positive")
        if self.refinement < 1:
            raise ValueError("refinement must be at least 1")


DEFAULT_QUADRATURE = QuadratureConfig()

_CONVERGENCE_TOL = 1e-6


def _log_simpson(log_f: np.ndarray, h: float) -> float:
    n = log_f.size
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(logsumexp(log_f + np.log(w)) + math.log(h / 3.0))


def _sanitize(log_f: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(log_f), -np.inf, log_f)


# ---------------------------------------------------------------------------
# sufficient statistics
# ---------------------------------------------------------------------------


def _gaussian_stats(values) -> tuple:
    y = np.asarray(values, dtype=float)
    return (int(y.size), float(np.sum(y)), float(np.sum(y * y)))


def _poisson_stats(values) -> tuple:
    y = np.asarray(values, dtype=float)
    if y.size and (np.any(y < 0) or np.any(y != np.floor(y))):
        raise ValueError("poisson observations must be non-negative integers")
    return (int(y.size), float(np.sum(y)), float(np.sum(gammaln(y + 1.0))))


# ---------------------------------------------------------------------------
# gaussian family
# ---------------------------------------------------------------------------


def _gaussian_log_evidence_tau(n, s, ss, m0, p0, tau):
    """log of the gaussian likelihood with the mean integrated out, fixed tau.

    Vectorized over ``tau``.  For an empty subset the value is exactly zero.
    """
    tau = np.asarray(tau, dtype=float)
    if n == 0:
        return np.zeros_like(tau)
    denom = p0 + n * tau
    quad = tau * ss + p0 * m0 * m0 - (p0 * m0 + tau * s) ** 2 / denom
    return 0.5 * n * (np.log(tau) - _LOG_2PI) + 0.5 * (np.log(p0) - np.log(denom)) - 0.5 * quad


def gaussian_evidence_given_tau(subset, m0: float, p0: float, tau: float) -> float:
    """Exact log integral of the gaussian likelihood over the mean at fixed precision."""
    if not (tau > 0 and p0 > 0):
        raise ValueError("invalid prior: precision values must be positive")
    n, s, ss = _gaussian_stats(subset)
    return float(_gaussian_log_evidence_tau(n, s, ss, m0, p0, tau))


@dataclass(frozen=True)
class _TauQuadrature:
    """Mode-centered Simpson grid over x = log(precision)."""

    x: np.ndarray          # grid nodes in log precision
    log_f: np.ndarray      # unnormalized log posterior of x at the nodes
    log_evidence: float    # Simpson integral of exp(log_f)
    x_mode: float          # continuous argmax of log_f

    @property
    def tau_mode(self) -> float:
        return math.exp(self.x_mode)

    def node_log_weights(self) -> np.ndarray:
        """Normalized log posterior node masses under the Simpson rule."""
        n = self.x.size
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        lw = self.log_f + np.log(w)
        return lw - logsumexp(lw)


def _adaptive_log_quadrature(logpost, x_init: float, quad: QuadratureConfig) -> _TauQuadrature:
    """Two-stage adaptive Simpson quadrature of exp(logpost) over the real line.

    ``logpost`` must be vectorized; the integrand is assumed unimodal with a
    mode reachable from ``x_init`` within +-40.
    """
    # locate the mode: coarse scan, then bounded refinement
    scan = np.linspace(x_init - 40.0, x_init + 40.0, 161)
    vals = _sanitize(logpost(scan))
    i = int(np.argmax(vals))
    lo, hi = scan[max(i - 1, 0)], scan[min(i + 1, scan.size - 1)]
    res = minimize_scalar(lambda x: -float(logpost(np.array([x]))[0]), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    x_mode = float(res.x)

    # curvature-based initial scale
    h = 1e-4
    trio = _sanitize(logpost(np.array([x_mode - h, x_mode, x_mode + h])))
    curv = (trio[0] + trio[2] - 2.0 * trio[1]) / (h * h)
    sd = 1.0 / math.sqrt(-curv) if curv < -1e-12 else 1.0
    sd = min(max(sd, 1e-6), 100.0)

    evidences = []
    x = log_f = None
    for _ in range(quad.refinement):
        half = quad.log_range_halfwidth * sd
        x = np.linspace(x_mode - half, x_mode + half, quad.grid_size)
        step = x[1] - x[0]
        log_f = _sanitize(logpost(x))
        evidences.append(_log_simpson(log_f, step))

        # re-center on the continuous mode near the grid argmax
        j = int(np.argmax(log_f))
        b_lo, b_hi = x[max(j - 1, 0)], x[min(j + 1, x.size - 1)]
        res = minimize_scalar(lambda t: -float(logpost(np.array([t]))[0]), bounds=(b_lo, b_hi),
                              method="bounded", options={"xatol": 1e-12})
        x_mode = float(res.x)

        # empirical scale for the next pass
        w = np.exp(log_f - np.max(log_f))
        wsum = float(np.sum(w))
        m1 = float(np.sum(w * x)) / wsum
        m2 = float(np.sum(w * x * x)) / wsum
        sd = min(max(math.sqrt(max(m2 - m1 * m1, 1e-24)), 1e-6), 100.0)

    if len(evidences) >= 2 and abs(evidences[-1] - evidences[-2]) > _CONVERGENCE_TOL:
        raise QuadratureError("quadrature failure: posterior integral did not stabilize")
    return _TauQuadrature(x=x, log_f=log_f, log_evidence=evidences[-1], x_mode=x_mode)


def _gaussian_location_mixture(stats, m0, p0, tau_nodes, node_log_w):
    """Location marginal as a precision-node mixture of exact gaussians."""
    n, s, _ = stats
    denom = p0 + n * tau_nodes
    centers = (p0 * m0 + tau_nodes * s) / denom
    sds = 1.0 / np.sqrt(denom)

    rel = node_log_w - np.max(node_log_w)
    keep = rel >= math.log(1e-14)
    pts = np.concatenate([
        np.linspace(c - 8.5 * sd, c + 8.5 * sd, 25)
        for c, sd in zip(centers[keep], sds[keep])
    ])
    support = np.unique(pts)
    if support.size > 3001:
        support = support[np.round(np.linspace(0, support.size - 1, 3001)).astype(int)]

    log_norm = -np.log(sds)[:, None] - 0.5 * _LOG_2PI
    log_kernel = -0.5 * ((support[None, :] - centers[:, None]) / sds[:, None]) ** 2
    log_mix = logsumexp(node_log_w[:, None] + log_norm + log_kernel, axis=0)
    return GridDensity.from_log(support, log_mix)


def _prior_gaussian_location(m0, p0) -> GridDensity:
    sd = 1.0 / math.sqrt(p0)
    support = np.linspace(m0 - 8.5 * sd, m0 + 8.5 * sd, 401)
    return GridDensity.from_log(support, -0.5 * p0 * (support - m0) ** 2)


def _prior_precision_grid(a, b, quad: QuadratureConfig) -> GridDensity:
    # Gamma prior rendered on an exp-spaced grid centered at its log-scale mode
    x_mode = math.log(a / b)
    sd = 1.0 / math.sqrt(a)
    x = np.linspace(x_mode - quad.log_range_halfwidth * sd, x_mode + quad.log_range_halfwidth * sd,
                    quad.grid_size)
    tau = np.exp(x)
    return GridDensity.from_log(tau, (a - 1.0) * x - b * tau)


def fit_gaussian_shared_precision(subsets: Sequence, m0: float, p0: float, a: float, b: float,
                                  quad: QuadratureConfig = DEFAULT_QUADRATURE):
    """Joint fit of K gaussian components tied to one precision.

    Returns ``(components, log_cond_evidence)`` where the single shared
    precision marginal is attached to every component and the conditional
    evidence comes from one joint quadrature (not a per-component sum).
    """
    stats = [_gaussian_stats(v) for v in subsets]
    return _fit_gaussian_shared_stats(stats, m0, p0, a, b, quad)


def _fit_gaussian_shared_stats(stats: Sequence[tuple], m0, p0, a, b, quad):
    if not (p0 > 0 and a > 0 and b > 0):
        raise ValueError("invalid prior: gaussian hyperparameters must be positive")
    log_prior_const = a * math.log(b) - gammaln(a)

    def logpost(x):
        tau = np.exp(x)
        total = a * x - b * tau + log_prior_const
        for (n, s, ss) in stats:
            if n:
                total = total + _gaussian_log_evidence_tau(n, s, ss, m0, p0, tau)
        return total

    # pooled within-component scatter gives the starting precision scale
    n_tot = sum(n for n, _, _ in stats)
    ss_c = sum(max(ss - s * s / n, 0.0) for n, s, ss in stats if n)
    tau0 = (0.5 * n_tot + a) / (b + 0.5 * ss_c)
    result = _adaptive_log_quadrature(logpost, math.log(tau0), quad)

    tau_nodes = np.exp(result.x)
    node_log_w = result.node_log_weights()
    shared_precision = GridDensity.from_log(tau_nodes, result.log_f - result.x)
    tau_mode = result.tau_mode

    components = []
    for st in stats:
        n, s, _ = st
        if n == 0:
            loc_mode = m0
            loc_source = _prior_gaussian_location(m0, p0)
            log_ev = 0.0
        else:
            loc_mode = (p0 * m0 + tau_mode * s) / (p0 + n * tau_mode)

            def loc_source(st=st):
                return _gaussian_location_mixture(st, m0, p0, tau_nodes, node_log_w)

            log_ev = _component_evidence_on_grid(st, m0, p0, result, log_prior_const, a, b)
        components.append(ComponentPosterior(
            location_mode=float(loc_mode),
            precision_mode=float(tau_mode),
            log_evidence=float(log_ev),
            n_obs=n,
            _location_source=loc_source,
            _precision_source=shared_precision,
        ))
    return tuple(components), float(result.log_evidence)


def _component_evidence_on_grid(stats, m0, p0, result: _TauQuadrature, log_prior_const, a, b):
    """Stand-alone evidence of one component using the joint precision grid.

    Diagnostic only under a shared precision: these values do not sum to the
    joint conditional evidence.
    """
    n, s, ss = stats
    tau = np.exp(result.x)
    log_f = a * result.x - b * tau + log_prior_const + _gaussian_log_evidence_tau(n, s, ss, m0, p0, tau)
    return _log_simpson(_sanitize(log_f), result.x[1] - result.x[0])


def fit_gaussian_component(subset, m0: float, p0: float, a: float, b: float,
                           quad: QuadratureConfig = DEFAULT_QUADRATURE) -> ComponentPosterior:
    """Posterior for one gaussian component with its own precision.

    The precision is integrated on a mode-centered log grid; the location
    marginal is the exact gaussian mixture over the precision nodes.  An
    empty subset returns the prior with zero log evidence.
    """
    if not (p0 > 0 and a > 0 and b > 0):
        raise ValueError("invalid prior: gaussian hyperparameters must be positive")
    stats = _gaussian_stats(subset)
    if stats[0] == 0:
        return _empty_gaussian_component(m0, p0, a, b, quad)
    components, _ = _fit_gaussian_shared_stats([stats], m0, p0, a, b, quad)
    return components[0]


def _empty_gaussian_component(m0, p0, a, b, quad) -> ComponentPosterior:
    return ComponentPosterior(
        location_mode=float(m0),
        precision_mode=float(a / b),  # mode of the log-precision density
        log_evidence=0.0,
        n_obs=0,
        _location_source=lambda: _prior_gaussian_location(m0, p0),
        _precision_source=lambda: _prior_precision_grid(a, b, quad),
    )


# ---------------------------------------------------------------------------
# poisson family
# ---------------------------------------------------------------------------


def fit_poisson_gamma(subset, a: float, b: float) -> ComponentPosterior:
    """Conjugate Gamma posterior for a poisson component."""
    if not (a > 0 and b > 0):
        raise ValueError("invalid prior: gamma hyperparameters must be positive")
    n, s, lg = _poisson_stats(subset)
    shape, rate = a + s, b + n
    log_ev = a * math.log(b) - gammaln(a) + gammaln(shape) - shape * math.log(rate) - lg
    mode = (shape - 1.0) / rate if shape >= 1.0 else 0.0
    return ComponentPosterior(
        location_mode=float(mode),
        precision_mode=None,
        log_evidence=float(log_ev),
        n_obs=n,
        _location_source=GammaDensity(shape, rate),
    )


def _log_mean_root(n, s, m0, p0):
    """Safeguarded Newton for the mode of the poisson log-mean posterior.

    Solves ``s - n*exp(x) - p0*(x - m0) = 0``; the objective is strictly
    concave so the root is unique.
    """
    def g(x):
        return s - n * math.exp(min(x, 700.0)) - p0 * (x - m0)

    x = math.log(max(s, 0.5) / n)
    lo, hi = x, x
    step = 1.0
    while g(lo) < 0:
        lo -= step
        step *= 2.0
    step = 1.0
    while g(hi) > 0:
        hi += step
        step *= 2.0
    for _ in range(200):
        gx = g(x)
        if gx > 0:
            lo = x
        else:
            hi = x
        gprime = -n * math.exp(min(x, 700.0)) - p0
        x_new = x - gx / gprime
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) < 1e-14 * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def fit_poisson_lognormal(subset, m0: float, p0: float,
                          quad: QuadratureConfig = DEFAULT_QUADRATURE) -> ComponentPosterior:
    """Poisson component with a gaussian prior on the log mean.

    The posterior over the log mean is integrated by adaptive Simpson
    quadrature; the location marginal is reported on the mean scale through
    the change of variables.
    """
    if not p0 > 0:
        raise ValueError("invalid prior: log-mean precision must be positive")
    n, s, lg = _poisson_stats(subset)
    if n == 0:
        sd = 1.0 / math.sqrt(p0)
        half = quad.log_range_halfwidth * sd
        x = np.linspace(m0 - half, m0 + half, quad.grid_size)
        prior = GridDensity.from_log(np.exp(x), -0.5 * p0 * (x - m0) ** 2 - x)
        return ComponentPosterior(
            location_mode=float(math.exp(m0)),
            precision_mode=None,
            log_evidence=0.0,
            n_obs=0,
            _location_source=prior,
        )

    def logpost(x):
        with np.errstate(over="ignore"):
            return s * x - n * np.exp(x) - 0.5 * p0 * (x - m0) ** 2

    x_mode = _log_mean_root(n, s, m0, p0)
    result = _adaptive_log_quadrature(logpost, x_mode, quad)
    log_ev = result.log_evidence + 0.5 * (math.log(p0) - _LOG_2PI) - lg
    marginal = GridDensity.from_log(np.exp(result.x), result.log_f - result.x)
    return ComponentPosterior(
        location_mode=float(math.exp(result.x_mode)),
        precision_mode=None,
        log_evidence=float(log_ev),
        n_obs=n,
        _location_source=marginal,
    )


# ---------------------------------------------------------------------------
# weights and dispatch
# ---------------------------------------------------------------------------


def dirichlet_mode(alpha, counts) -> np.ndarray:
    """Mode of the Dirichlet full conditional of the mixture weights."""
    alpha = np.asarray(alpha, dtype=float)
    counts = np.asarray(counts, dtype=float)
    post = alpha + counts
    if np.any(post <= 1.0):
        raise ValueError("mode undefined: every alpha + count must exceed one")
    mode = post - 1.0
    return mode / mode.sum()


def conditional_fit(y, allocation: Allocation, family: FamilySpec, priors: PriorSpec,
                    quad: QuadratureConfig = DEFAULT_QUADRATURE) -> ConditionalFit:
    """Fit all component posteriors for a fixed allocation, as labeled."""
    return ConditionalFitter(y, family, priors, quad).fit(allocation)


class ConditionalFitter:
    """Memoizing conditional-fit factory bound to one dataset and prior.

    ``fit`` evaluates an allocation with its labels as given; ``fit_labels``
    additionally relabels the result canonically (components sorted by
    location mode) so that label-switched duplicates share one cache entry
    and one trace atom.
    """

    def __init__(self, y, family: FamilySpec, priors: PriorSpec,
                 quad: QuadratureConfig = DEFAULT_QUADRATURE, cache_cap: int = 1_000_000):
        self.family = family
        self.priors = priors
        self.quad = quad
        self.cache_cap = cache_cap
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("observations must form a non-empty 1-D vector")
        if family.family == "poisson" and (np.any(y < 0) or np.any(y != np.floor(y))):
            raise ValueError("poisson observations must be non-negative integers")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        self.y = y
        self._ysq = y * y
        self._lgy1 = gammaln(y + 1.0)
        self._component_cache: OrderedDict = OrderedDict()
        self._shared_cache: OrderedDict = OrderedDict()
        self._fit_cache: OrderedDict = OrderedDict()
        self._empty: Optional[ComponentPosterior] = None

    # -- caches ------------------------------------------------------------

    def _cache_get(self, cache: OrderedDict, key):
        hit = cache.get(key)
        if hit is not None:
            cache.move_to_end(key)
        return hit

    def _cache_put(self, cache: OrderedDict, key, value):
        cache[key] = value
        if len(cache) > self.cache_cap:
            cache.popitem(last=False)
        return value

    # -- per-component fits --------------------------------------------------

    def empty_component(self) -> ComponentPosterior:
        if self._empty is None:
            self._empty = self._fit_component_stats(self._null_stats())
        return self._empty

    def _null_stats(self):
        return (0, 0.0, 0.0)

    def _fit_component_stats(self, stats) -> ComponentPosterior:
        cached = self._cache_get(self._component_cache, stats)
        if cached is not None:
            return cached
        fam, priors = self.family, self.priors
        if fam.family == "gaussian":
            m0, p0 = priors.gaussian_mean_prior
            a, b = priors.gaussian_precision_prior
            if stats[0] == 0:
                comp = _empty_gaussian_component(m0, p0, a, b, self.quad)
            else:
                comp = _fit_gaussian_shared_stats([stats], m0, p0, a, b, self.quad)[0][0]
        elif fam.poisson_prior_kind == "gamma":
            a, b = priors.poisson_gamma_prior
            n, s, lg = stats
            shape, rate = a + s, b + n
            log_ev = a * math.log(b) - gammaln(a) + gammaln(shape) - shape * math.log(rate) - lg
            comp = ComponentPosterior(
                location_mode=float((shape - 1.0) / rate) if shape >= 1.0 else 0.0,
                precision_mode=None,
                log_evidence=float(log_ev),
                n_obs=n,
                _location_source=GammaDensity(shape, rate),
            )
        else:
            m0, p0 = priors.poisson_lognormal_prior
            comp = self._poisson_lognormal_stats(stats, m0, p0)
        return self._cache_put(self._component_cache, stats, comp)

    def _poisson_lognormal_stats(self, stats, m0, p0) -> ComponentPosterior:
        n, s, lg = stats
        if n == 0:
            return fit_poisson_lognormal(np.empty(0), m0, p0, self.quad)

        def logpost(x):
            with np.errstate(over="ignore"):
                return s * x - n * np.exp(x) - 0.5 * p0 * (x - m0) ** 2

        x_mode = _log_mean_root(n, s, m0, p0)
        result = _adaptive_log_quadrature(logpost, x_mode, self.quad)
        log_ev = result.log_evidence + 0.5 * (math.log(p0) - _LOG_2PI) - lg
        marginal = GridDensity.from_log(np.exp(result.x), result.log_f - result.x)
        return ComponentPosterior(
            location_mode=float(math.exp(result.x_mode)),
            precision_mode=None,
            log_evidence=float(log_ev),
            n_obs=n,
            _location_source=marginal,
        )

    # -- stats extraction ----------------------------------------------------

    def _stats_by_label(self, z: np.ndarray, k: int):
        idx = z - 1
        n = np.bincount(idx, minlength=k).astype(float)
        s = np.bincount(idx, weights=self.y, minlength=k)
        if self.family.family == "gaussian":
            third = np.bincount(idx, weights=self._ysq, minlength=k)
        else:
            third = np.bincount(idx, weights=self._lgy1, minlength=k)
        return [(int(n[j]), float(s[j]), float(third[j])) for j in range(k)]

    # -- assembled fits --------------------------------------------------------

    def fit(self, allocation: Allocation) -> ConditionalFit:
        """Conditional fit with the allocation's labels left as given."""
        stats = self._stats_by_label(allocation.z, allocation.n_components)
        components, log_cond = self._components_for_stats(stats)
        return self._assemble(allocation, components, log_cond)

    def fit_labels(self, z: np.ndarray, k: int) -> ConditionalFit:
        """Canonical conditional fit for a raw label vector.

        Components are relabeled in ascending order of their location modes
        before the fit is keyed and cached.
        """
        stats = self._stats_by_label(np.asarray(z, dtype=np.int64), k)
        components, log_cond = self._components_for_stats(stats)
        locations = np.array([c.location_mode for c in components])
        perm = canonical_permutation(locations)
        alloc = canonicalize(Allocation.from_labels(z, k), locations)

        cached = self._cache_get(self._fit_cache, alloc.key)
        if cached is not None:
            return cached
        fit = self._assemble(alloc, tuple(components[j] for j in perm), log_cond)
        return self._cache_put(self._fit_cache, alloc.key, fit)

    def _components_for_stats(self, stats):
        if self.family.family == "gaussian" and self.family.shared_precision:
            key = (tuple(sorted(st for st in stats if st[0] > 0)), len(stats))
            hit = self._cache_get(self._shared_cache, key)
            if hit is None:
                m0, p0 = self.priors.gaussian_mean_prior
                a, b = self.priors.gaussian_precision_prior
                by_stats = {}
                comps, log_cond = _fit_gaussian_shared_stats(stats, m0, p0, a, b, self.quad)
                for st, comp in zip(stats, comps):
                    by_stats.setdefault(st, comp)
                hit = self._cache_put(self._shared_cache, key, (by_stats, log_cond))
            by_stats, log_cond = hit
            components = [by_stats[st] for st in stats]
            return components, log_cond
        components = [self._fit_component_stats(st) for st in stats]
        log_cond = float(sum(c.log_evidence for c in components))
        return components, log_cond

    def _assemble(self, allocation: Allocation, components, log_cond) -> ConditionalFit:
        alpha = self.priors.alpha_vector(allocation.n_components)
        weights = dirichlet_mode(alpha, allocation.counts)
        locations = np.array([c.location_mode for c in components])
        return ConditionalFit(
            allocation=allocation,
            components=tuple(components),
            log_cond_evidence=float(log_cond),
            modal_weights=weights,
            log_multiplicity=log_canonical_multiplicity(allocation.counts, locations),
        )

    def single_component_trace(self, config=None) -> AllocationTrace:
        """Degenerate trace for a one-component model (no sampling needed)."""
        z = np.ones(self.y.size, dtype=np.int64)
        fit = self.fit_labels(z, 1)
        key = fit.allocation.key
        return AllocationTrace(visits=(key,), table={key: TraceEntry(1, fit)}, config=config)
