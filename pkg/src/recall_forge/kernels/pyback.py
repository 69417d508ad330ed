"""Pure-NumPy kernel backend.

Reference implementation of the hot numeric kernels.  The compiled backend
in ``_cykernels.pyx`` mirrors these signatures exactly; both operate on
C-contiguous float64 arrays and are deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def tower_forward(x: np.ndarray, weights: list[np.ndarray],
                  biases: list[np.ndarray]) -> list[np.ndarray]:
    """Run a batch through an affine tower.

    Hidden layers apply tanh; the final layer is linear.  Returns the
    post-activation output of every layer (the last entry is the tower
    output), which the backward pass consumes.
    """
    acts = []
    h = x
    n = len(weights)
    for k in range(n):
        h = h @ weights[k].T + biases[k]
        if k < n - 1:
            h = np.tanh(h)
        acts.append(h)
    return acts


def tower_backward(x: np.ndarray, weights: list[np.ndarray],
                   acts: list[np.ndarray],
                   d_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Reverse-mode pass through a tower produced by :func:`tower_forward`.

    Returns per-layer weight and bias gradients, outermost layer last,
    matching the ordering of ``weights``.
    """
    n = len(weights)
    d_weights: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = d_out
    for k in range(n - 1, -1, -1):
        inp = acts[k - 1] if k > 0 else x
        d_weights[k] = delta.T @ inp
        d_biases[k] = delta.sum(axis=0)
        if k > 0:
            # acts[k-1] holds tanh output, so tanh' = 1 - act^2
            delta = (delta @ weights[k]) * (1.0 - acts[k - 1] ** 2)
    return d_weights, d_biases


def normalize_rows(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return row-normalized copy of ``z`` and the row norms."""
    norms = np.sqrt((z * z).sum(axis=1))
    return z / norms[:, None], norms


def normalize_rows_backward(zhat: np.ndarray, norms: np.ndarray,
                            d_zhat: np.ndarray) -> np.ndarray:
    """Gradient of row normalization: dz = (dzhat - zhat (zhat.dzhat)) / norm."""
    proj = (zhat * d_zhat).sum(axis=1)
    return (d_zhat - zhat * proj[:, None]) / norms[:, None]


def matmul_nn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def matmul_nt(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b.T


def matmul_tn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.T @ b
