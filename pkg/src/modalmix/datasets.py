"""Bundled benchmark datasets and mixture simulators.

``galaxies``: velocities of 82 galaxies in the Corona Borealis region
(Postman, Huchra & Geller 1986, as tabulated by Roeder 1990, including the
corrected 78th value 26960 km/s), stored in thousands of km/s.

``earthquakes``: yearly counts of major earthquakes (magnitude 7 and above)
for 1900-2006, 107 values, as tabulated by Zucchini & MacDonald, Hidden
Markov Models for Time Series (2nd ed.).

SHA-256 checksums of the comma-joined decimal values are pinned in
``BUILTIN_CHECKSUMS`` and verified by the test suite.
"""

from __future__ import annotations

import csv
import hashlib

import numpy as np

__all__ = [
    "GALAXY_VELOCITIES",
    "EARTHQUAKE_COUNTS",
    "BUILTIN_CHECKSUMS",
    "list_builtins",
    "load_builtin",
    "simulate_gaussian",
    "simulate_poisson",
    "simulate_mixture",
    "write_csv",
    "read_csv",
]

_GALAXY_KMS = (
    9172, 9350, 9483, 9558, 9775, 10227, 10406, 16084, 16170, 18419,
    18552, 18600, 18927, 19052, 19070, 19330, 19343, 19349, 19440, 19473,
    19529, 19541, 19547, 19663, 19846, 19856, 19863, 19914, 19918, 19973,
    19989, 20166, 20175, 20179, 20196, 20215, 20221, 20415, 20629, 20795,
    20821, 20846, 20875, 20986, 21137, 21492, 21701, 21814, 21921, 21960,
    22185, 22209, 22242, 22249, 22314, 22374, 22495, 22746, 22747, 22888,
    22914, 23206, 23241, 23263, 23484, 23538, 23542, 23666, 23706, 23711,
    24129, 24285, 24289, 24366, 24717, 24990, 25633, 26960, 26995, 32065,
    32789, 34279,
)

# stored in thousands of km/s so location estimates land on a single-digit scale
GALAXY_VELOCITIES = tuple(v / 1000.0 for v in _GALAXY_KMS)

EARTHQUAKE_COUNTS = (
    13, 14, 8, 10, 16, 26, 32, 27, 18, 32,
    36, 24, 22, 23, 22, 18, 25, 21, 21, 14,
    8, 11, 14, 23, 18, 17, 19, 20, 22, 19,
    13, 26, 13, 14, 22, 24, 21, 22, 26, 21,
    23, 24, 27, 41, 31, 27, 35, 26, 28, 36,
    39, 21, 17, 22, 17, 19, 15, 34, 10, 15,
    22, 18, 15, 20, 15, 22, 19, 16, 30, 27,
    29, 23, 20, 16, 21, 21, 25, 16, 18, 15,
    18, 14, 10, 15, 8, 15, 6, 11, 8, 7,
    18, 16, 13, 12, 13, 20, 15, 16, 12, 18,
    15, 16, 13, 15, 16, 11, 11,
)

_BUILTINS = {
    "galaxies": GALAXY_VELOCITIES,
    "earthquakes": EARTHQUAKE_COUNTS,
}


def dataset_checksum(values) -> str:
    joined = ",".join(repr(float(v)) for v in values)
    return hashlib.sha256(joined.encode("ascii")).hexdigest()


BUILTIN_CHECKSUMS = {name: dataset_checksum(vals) for name, vals in _BUILTINS.items()}


def list_builtins():
    return sorted(_BUILTINS)


def load_builtin(name: str) -> np.ndarray:
    try:
        return np.asarray(_BUILTINS[name], dtype=float)
    except KeyError:
        raise ValueError(f"unknown builtin dataset {name!r}; available: {list_builtins()}") from None


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------


def _check_sizes(sizes):
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 0 for s in sizes) or sum(sizes) == 0:
        raise ValueError("empty data: component sizes must be non-negative and sum to at least one")
    return sizes


def simulate_gaussian(means, precisions, sizes, seed: int = 0) -> np.ndarray:
    """Draws from a gaussian mixture, components concatenated in order."""
    means = [float(m) for m in means]
    precisions = [float(p) for p in precisions]
    sizes = _check_sizes(sizes)
    if not (len(means) == len(precisions) == len(sizes)):
        raise ValueError("means, precisions and sizes must have equal length")
    if any(p <= 0 for p in precisions):
        raise ValueError("precisions must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    parts = [rng.normal(m, 1.0 / np.sqrt(p), size=s) for m, p, s in zip(means, precisions, sizes)]
    return np.concatenate(parts)


def simulate_poisson(means, sizes, seed: int = 0) -> np.ndarray:
    """Draws from a poisson mixture, components concatenated in order."""
    means = [float(m) for m in means]
    sizes = _check_sizes(sizes)
    if len(means) != len(sizes):
        raise ValueError("means and sizes must have equal length")
    if any(m < 0 for m in means):
        raise ValueError("poisson means must be non-negative")
    rng = np.random.Generator(np.random.Philox(seed))
    parts = [rng.poisson(m, size=s) for m, s in zip(means, sizes)]
    return np.concatenate(parts).astype(float)


def simulate_mixture(family: str, means, sizes, precisions=None, seed: int = 0) -> np.ndarray:
    if family == "gaussian":
        if precisions is None:
            precisions = [1.0] * len(list(means))
        return simulate_gaussian(means, precisions, sizes, seed)
    if family == "poisson":
        return simulate_poisson(means, sizes, seed)
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------


def write_csv(path, values):
    """One value per row under a 'y' header, full decimal precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"])
        for v in np.asarray(values, dtype=float):
            writer.writerow([repr(float(v))])


def read_csv(path) -> np.ndarray:
    """Read the single numeric 'y' column; accepts LF or CRLF line endings."""
    with open(path, "r", newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "y" not in reader.fieldnames:
            raise ValueError("input CSV must have a column named 'y'")
        values = []
        for row in reader:
            cell = (row["y"] or "").strip()
            if not cell:
                continue
            values.append(float(cell))
    if not values:
        raise ValueError("input CSV contains no observations")
    return np.asarray(values, dtype=float)
