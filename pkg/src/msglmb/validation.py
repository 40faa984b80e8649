"""Input validation helpers used by the estimators and model constructors."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import ModelError

SYMMETRY_RTOL = 1e-10
EIGENVALUE_FLOOR = 1e-10  # relative to trace


def as_rng(seed) -> np.random.Generator:
    """Return a Generator from a seed, an existing Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_probability(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= float(value) <= 1.0:
        raise ModelError(f"{name} must be a probability in [0, 1], got {value!r}")
    return float(value)


def check_vector(value, dim: int | None, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ModelError(f"{name} must have dimension {dim}, got {arr.shape[0]}")
    return arr


def check_matrix(value, shape: tuple[int | None, int | None], name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ModelError(f"{name} must be a matrix, got shape {arr.shape}")
    rows, cols = shape
    if rows is not None and arr.shape[0] != rows:
        raise ModelError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ModelError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def check_covariance(value, dim: int | None, name: str) -> np.ndarray:
    """Validate symmetry and near-positive-semidefiniteness of a covariance."""
    arr = check_matrix(value, (dim, dim), name)
    if arr.shape[0] != arr.shape[1]:
        raise ModelError(f"{name} must be square, got shape {arr.shape}")
    scale = max(np.abs(arr).max(), 1.0)
    if not np.allclose(arr, arr.T, rtol=0.0, atol=SYMMETRY_RTOL * scale):
        raise ModelError(f"{name} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    trace = float(np.trace(arr))
    floor = -EIGENVALUE_FLOOR * max(trace, 1e-300)
    if np.linalg.eigvalsh(arr).min() < floor:
        raise ModelError(f"{name} has a significantly negative eigenvalue")
    return arr


def check_measurement_sequence(measurements, z_dim: int, n_scans: int | None = None):
    """Coerce per-scan measurements into a list of (M_j, z_dim) float arrays.

    Accepts, per scan, an array, a list of vectors, or an empty list.
    """
    if isinstance(measurements, np.ndarray) and measurements.ndim != 1:
        raise ModelError("measurements must be a per-scan sequence, not one array")
    out = []
    for j, scan in enumerate(measurements, start=1):
        arr = np.asarray(scan, dtype=float)
        if arr.size == 0:
            arr = np.empty((0, z_dim))
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[1] != z_dim:
            raise ModelError(
                f"scan {j}: expected measurements of dimension {z_dim}, "
                f"got array of shape {arr.shape}"
            )
        out.append(arr)
    if n_scans is not None and len(out) != n_scans:
        raise ModelError(f"expected {n_scans} scans of measurements, got {len(out)}")
    return out
