"""Dense vector helpers and cosine similarity.

Vectors are 1-D float64 NumPy arrays throughout the package.  All
operations here are pure functions over immutable inputs and are safe to
call concurrently.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError

# Norms below this floor are treated as zero vectors.
NORM_FLOOR = 1e-12


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array, validating shape and values."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise ShapeError(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} contains non-finite values")
    return np.ascontiguousarray(v)


def checked_norm(v: np.ndarray, name: str = "vector") -> float:
    """Euclidean norm, raising DomainError if it falls below the floor."""
    n = float(np.sqrt(v @ v))
    if n < NORM_FLOOR:
        raise DomainError(f"{name} has near-zero norm {n!r}")
    return n


def cosine_similarity(u, v) -> float:
    """Cosine similarity between two nonzero vectors of equal dimension.

    Raises:
        ShapeError: on dimension mismatch.
        DomainError: if either input has norm below ``NORM_FLOOR``.
    """
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ShapeError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    nu = checked_norm(u, "u")
    nv = checked_norm(v, "v")
    return float(u @ v) / (nu * nv)
