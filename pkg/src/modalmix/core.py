"""Shared domain types for allocation-based mixture inference.

Everything here is immutable after construction: observation vectors,
prior specifications, allocation vectors with their canonical byte keys,
grid-based densities used to represent posterior marginals, and the
per-allocation conditional fit records produced by the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "QuadratureError",
    "GridDensity",
    "GammaDensity",
    "FamilySpec",
    "PriorSpec",
    "Allocation",
    "allocation_counts",
    "canonical_permutation",
    "canonicalize",
    "log_canonical_multiplicity",
    "ComponentPosterior",
    "ConditionalFit",
    "TraceEntry",
    "AllocationTrace",
    "GAUSSIAN",
    "POISSON",
]

GAUSSIAN = "gaussian"
POISSON = "poisson"

MAX_COMPONENTS = 255  # labels must fit in one byte of the allocation key


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature fails to converge."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridDensity:
    """Normalized density on a strictly increasing support grid.

    ``log_density`` holds the log density at each support point (finite or
    -inf).  Between points the log density is interpolated linearly; outside
    the support range the density is zero.  Normalization is enforced so the
    trapezoid integral of ``exp(log_density)`` over the support equals one.
    """

    support: np.ndarray
    log_density: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", _readonly(np.asarray(self.support, dtype=float)))
        object.__setattr__(self, "log_density", _readonly(np.asarray(self.log_density, dtype=float)))
        if self.support.ndim != 1 or self.support.shape != self.log_density.shape:
            raise ValueError("support and log_density must be equal-length 1-D arrays")
        if self.support.size < 2:
            raise ValueError("support needs at least two points")
        if not np.all(np.isfinite(self.support)):
            raise ValueError("support must be finite")
        if not np.all(np.diff(self.support) > 0):
            raise ValueError("support must be strictly increasing")
        if np.any(np.isnan(self.log_density)) or np.any(self.log_density == np.inf):
            raise ValueError("log_density entries must be finite or -inf")

    @staticmethod
    def from_log(support, log_density) -> "GridDensity":
        """Build a density from unnormalized log values, normalizing in log space."""
        support = np.asarray(support, dtype=float)
        log_density = np.asarray(log_density, dtype=float)
        log_norm = _log_trapezoid(support, log_density)
        if not np.isfinite(log_norm):
            raise ValueError("density mass is zero or non-finite; cannot normalize")
        return GridDensity(support, log_density - log_norm)

    def log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.support, self.log_density, left=-np.inf, right=-np.inf)
        return out

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def integral(self) -> float:
        return float(np.exp(_log_trapezoid(self.support, self.log_density)))

    def moments(self) -> tuple[float, float]:
        """Trapezoid mean and standard deviation."""
        f = np.exp(self.log_density)
        x = self.support
        m1 = float(np.trapezoid(f * x, x))
        m2 = float(np.trapezoid(f * x * x, x))
        var = max(m2 - m1 * m1, 0.0)
        return m1, math.sqrt(var)

    def mean(self) -> float:
        return self.moments()[0]

    def sd(self) -> float:
        return self.moments()[1]

    def mode(self) -> float:
        return float(self.support[int(np.argmax(self.log_density))])

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Inverse-CDF draws using a piecewise-linear CDF through the grid."""
        f = np.exp(self.log_density - np.max(self.log_density[np.isfinite(self.log_density)]))
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(self.support)
        cdf = np.concatenate([[0.0], np.cumsum(seg)])
        cdf /= cdf[-1]
        u = rng.random(size if size is not None else 1)
        draws = np.interp(u, cdf, self.support)
        return draws if size is not None else draws[0]


def _log_trapezoid(x: np.ndarray, log_f: np.ndarray) -> float:
    """log of the trapezoid integral of exp(log_f) over x, overflow-safe."""
    with np.errstate(invalid="ignore"):
        seg = np.logaddexp(log_f[1:], log_f[:-1]) + np.log(np.diff(x)) - math.log(2.0)
    return float(logsumexp(seg))


@dataclass(frozen=True)
class GammaDensity:
    """Exact Gamma(shape, rate) record used for conjugate Poisson posteriors."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("invalid prior: Gamma shape and rate must be positive")

    def mean(self) -> float:
        return self.shape / self.rate

    def sd(self) -> float:
        return math.sqrt(self.shape) / self.rate

    def mode(self) -> float:
        # natural-scale mode, floored at zero for shape < 1
        return max((self.shape - 1.0) / self.rate, 0.0)

    def log_pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * math.log(self.rate)
                - gammaln(self.shape)
                + (self.shape - 1.0) * np.log(x)
                - self.rate * x
            )
        return np.where(x > 0, out, -np.inf) if self.shape != 1.0 else np.where(x >= 0, out, -np.inf)

    def as_grid(self, n_points: int = 401) -> GridDensity:
        """Grid rendering over a central [1e-9, 1-1e-9] quantile span."""
        from scipy.stats import gamma as gamma_dist

        lo = gamma_dist.ppf(1e-9, self.shape, scale=1.0 / self.rate)
        hi = gamma_dist.ppf(1.0 - 1e-9, self.shape, scale=1.0 / self.rate)
        lo = max(lo, hi * 1e-12)
        support = np.linspace(lo, hi, n_points)
        return GridDensity.from_log(support, self.log_pdf(support))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    """Observation family for the mixture components.

    ``shared_precision`` ties all Gaussian components to a single precision.
    ``poisson_prior_kind`` picks the prior on the Poisson mean: ``"gamma"``
    (conjugate) or ``"lognormal"`` (Gaussian prior on the log mean).
    """

    family: str
    shared_precision: bool = False
    poisson_prior_kind: str = "lognormal"

    def __post_init__(self):
        if self.family not in (GAUSSIAN, POISSON):
            raise ValueError(f"unknown family {self.family!r}")
        if self.shared_precision and self.family != GAUSSIAN:
            raise ValueError("shared_precision only applies to the gaussian family")
        if self.poisson_prior_kind not in ("gamma", "lognormal"):
            raise ValueError(f"unknown poisson prior kind {self.poisson_prior_kind!r}")


@dataclass(frozen=True)
class PriorSpec:
    """Prior configuration shared by all components.

    ``alpha`` is the Dirichlet concentration: a scalar (applied to every
    component) or a length-K vector.  The modal sampler requires every
    concentration to exceed one so the Dirichlet full-conditional mode exists
    even for empty components.
    """

    alpha: Union[float, tuple] = 2.0
    gaussian_mean_prior: tuple = (0.0, 0.001)      # (m0, p0)
    gaussian_precision_prior: tuple = (0.5, 0.5)   # (a, b)
    poisson_gamma_prior: tuple = (1.0, 0.1)        # (a, b)
    poisson_lognormal_prior: tuple = (0.0, 0.001)  # (m0, p0) on log mean

    def __post_init__(self):
        m0, p0 = self.gaussian_mean_prior
        a, b = self.gaussian_precision_prior
        ga, gb = self.poisson_gamma_prior
        lm, lp = self.poisson_lognormal_prior
        if not (np.isfinite(m0) and p0 > 0 and a > 0 and b > 0):
            raise ValueError("invalid prior: gaussian hyperparameters out of range")
        if not (ga > 0 and gb > 0):
            raise ValueError("invalid prior: poisson gamma hyperparameters out of range")
        if not (np.isfinite(lm) and lp > 0):
            raise ValueError("invalid prior: poisson lognormal hyperparameters out of range")
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if np.any(alpha <= 0):
            raise ValueError("invalid prior: Dirichlet concentrations must be positive")

    def alpha_vector(self, n_components: int) -> np.ndarray:
        """Expand ``alpha`` to a length-K vector."""
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.size == 1:
            return np.full(n_components, float(alpha[0]))
        if alpha.size != n_components:
            raise ValueError(f"alpha has length {alpha.size}, expected {n_components}")
        return alpha.copy()


# ---------------------------------------------------------------------------
# allocations
# ---------------------------------------------------------------------------

_KEY_PREFIX_BYTES = 4


def encode_allocation_key(z: np.ndarray) -> bytes:
    """Length-prefixed byte encoding of a label vector (labels 1..255)."""
    n = int(z.size)
    return n.to_bytes(_KEY_PREFIX_BYTES, "big") + bytes(int(v) for v in z)


def decode_allocation_key(key: bytes) -> np.ndarray:
    """Recover the label vector from its byte key."""
    n = int.from_bytes(key[:_KEY_PREFIX_BYTES], "big")
    body = key[_KEY_PREFIX_BYTES:]
    if len(body) != n:
        raise ValueError("corrupt allocation key")
    return np.frombuffer(body, dtype=np.uint8).astype(np.int64)


def allocation_counts(z, n_components: int) -> np.ndarray:
    """Per-component sizes of a label vector with labels in 1..K."""
    z = np.asarray(z, dtype=np.int64)
    if z.size and (z.min() < 1 or z.max() > n_components):
        raise ValueError("allocation index out of range")
    return np.bincount(z - 1, minlength=n_components).astype(np.int64)


@dataclass(frozen=True)
class Allocation:
    """Latent assignment vector with derived counts and a canonical byte key."""

    z: np.ndarray
    n_components: int
    counts: np.ndarray = field(repr=False)
    key: bytes = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "z", _readonly(np.asarray(self.z, dtype=np.int64)))
        object.__setattr__(self, "counts", _readonly(np.asarray(self.counts, dtype=np.int64)))

    @staticmethod
    def from_labels(z, n_components: int) -> "Allocation":
        z = np.asarray(z, dtype=np.int64)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("allocation must be a non-empty 1-D label vector")
        if n_components < 1 or n_components > MAX_COMPONENTS:
            raise ValueError(f"number of components must lie in 1..{MAX_COMPONENTS}")
        counts = allocation_counts(z, n_components)
        return Allocation(z=z, n_components=n_components, counts=counts, key=encode_allocation_key(z))

    @property
    def n(self) -> int:
        return int(self.z.size)


def canonical_permutation(locations) -> np.ndarray:
    """Order of old component labels sorted by ascending location.

    Ties break on the original label index.  ``perm[r]`` is the zero-based
    old label taking new label ``r + 1``.
    """
    locations = np.asarray(locations, dtype=float)
    if not np.all(np.isfinite(locations)):
        raise ValueError("invalid location estimate")
    return np.argsort(locations, kind="stable")


def canonicalize(alloc: Allocation, locations) -> Allocation:
    """Relabel an allocation so component labels ascend with location."""
    locations = np.asarray(locations, dtype=float)
    if locations.size != alloc.n_components:
        raise ValueError("one location per component is required")
    perm = canonical_permutation(locations)
    new_label = np.empty(alloc.n_components, dtype=np.int64)
    new_label[perm] = np.arange(1, alloc.n_components + 1)
    return Allocation.from_labels(new_label[alloc.z - 1], alloc.n_components)


def log_canonical_multiplicity(counts, locations) -> float:
    """Log count of distinct labelings collapsing to one canonical allocation.

    Relabeling a mixture state permutes component labels without changing the
    partition of the data.  Sorting labels by location maps each such state to
    a canonical representative; this returns the log size of the preimage.
    With U occupied components and no location ties it equals
    ``log K!/(K-U)!``; exact location ties shrink it because tied groups remain
    distinguishable only through the index tie-break.
    """
    counts = np.asarray(counts, dtype=np.int64)
    locations = np.asarray(locations, dtype=float)
    if not np.all(np.isfinite(locations)):
        raise ValueError("invalid location estimate")
    k = counts.size
    occupied = int(np.sum(counts > 0))
    result = gammaln(k + 1) - gammaln(k - occupied + 1)
    # tie groups by exact location value; within a group only the empty
    # members may permute freely
    _, inverse = np.unique(locations, return_inverse=True)
    for g in range(inverse.max() + 1):
        members = inverse == g
        c = int(np.sum(members))
        if c <= 1:
            continue
        e = int(np.sum(members & (counts == 0)))
        result += gammaln(e + 1) - gammaln(c + 1)
    return float(result)


# ---------------------------------------------------------------------------
# conditional fit records
# ---------------------------------------------------------------------------

LocationMarginal = Union[GridDensity, GammaDensity]
_MarginalSource = Union[GridDensity, GammaDensity, Callable[[], GridDensity], None]


@dataclass(frozen=True)
class ComponentPosterior:
    """Posterior of one component's parameters under a fixed allocation.

    ``log_evidence`` is the component's additive contribution to the
    conditional log marginal likelihood; an empty component contributes
    exactly zero and its posterior equals the prior.  Marginal grids may be
    built lazily (some are expensive mixtures) and are cached on first access.
    """

    location_mode: float
    precision_mode: Optional[float]
    log_evidence: float
    n_obs: int
    _location_source: _MarginalSource = field(repr=False, compare=False)
    _precision_source: _MarginalSource = field(default=None, repr=False, compare=False)

    @property
    def location_marginal(self) -> LocationMarginal:
        return self._resolve("_location_source", "_location_cache")

    @property
    def precision_marginal(self) -> Optional[GridDensity]:
        if self._precision_source is None:
            return None
        return self._resolve("_precision_source", "_precision_cache")

    def _resolve(self, source_name: str, cache_name: str):
        cached = self.__dict__.get(cache_name)
        if cached is None:
            source = getattr(self, source_name)
            cached = source() if callable(source) else source
            object.__setattr__(self, cache_name, cached)
        return cached

    @property
    def is_empty(self) -> bool:
        return self.n_obs == 0


@dataclass(frozen=True)
class ConditionalFit:
    """Everything the engine returns for one allocation.

    ``log_cond_evidence`` is the conditional log marginal likelihood of the
    data given the allocation; ``modal_weights`` and ``modal_params`` are the
    full-conditional modes plugged into the allocation sweep.
    ``log_multiplicity`` counts (in log) the label assignments collapsed into
    this canonical allocation, so that sums over recorded allocations can
    reproduce sums over raw label vectors.
    """

    allocation: Allocation
    components: tuple
    log_cond_evidence: float
    modal_weights: np.ndarray
    log_multiplicity: float

    def __post_init__(self):
        object.__setattr__(self, "modal_weights", _readonly(np.asarray(self.modal_weights, dtype=float)))

    @property
    def modal_params(self) -> tuple:
        """Per-component (location mode, precision mode or None) pairs."""
        return tuple((c.location_mode, c.precision_mode) for c in self.components)

    @property
    def locations(self) -> np.ndarray:
        return np.array([c.location_mode for c in self.components])


@dataclass
class TraceEntry:
    visit_count: int
    fit: ConditionalFit


@dataclass(frozen=True)
class AllocationTrace:
    """Visited allocation set with visit counts and memoized fits.

    ``visits`` lists the canonical key of every retained sweep in order;
    ``table`` maps each distinct key to its visit count and conditional fit.
    """

    visits: tuple
    table: dict
    config: object = None

    @property
    def total_visits(self) -> int:
        return len(self.visits)

    def __post_init__(self):
        counted = sum(e.visit_count for e in self.table.values())
        if counted != len(self.visits):
            raise ValueError("visit counts disagree with the retained sweep list")
        for key in self.visits:
            if key not in self.table:
                raise ValueError("retained sweep missing from the trace table")


def iter_fits(trace: AllocationTrace) -> Iterable[tuple[bytes, TraceEntry]]:
    return trace.table.items()
