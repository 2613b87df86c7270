"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

__all__ = ["check_observations", "check_k_range"]


def check_observations(data, family: str) -> np.ndarray:
    """Coerce input to a 1-D observation vector valid for the family.

    Accepts flat sequences or single-column 2-D arrays (the sklearn ``X``
    convention).  Gaussian observations must be finite reals; poisson
    observations must be non-negative integers.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1:
        raise ValueError("observations must be a 1-D vector or a single-column matrix")
    if y.size == 0:
        raise ValueError("at least one observation is required")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    if family == "poisson":
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise ValueError("poisson observations must be non-negative integers")
    return y


def check_k_range(k_min: int, k_max: int, upper: int = 10) -> range:
    k_min, k_max = int(k_min), int(k_max)
    if not (1 <= k_min <= k_max <= upper):
        raise ValueError(f"component range must satisfy 1 <= k_min <= k_max <= {upper}")
    return range(k_min, k_max + 1)
