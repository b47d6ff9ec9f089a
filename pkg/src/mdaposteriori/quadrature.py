"""Quadrature rules on reference simplices.

Rules are returned in barycentric form so they can be mapped onto any
simplex embedded in ambient space: a point is ``bary @ vertices`` and the
weights sum to one, so integrals are ``volume * sum(w * f)``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _jacobi01(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Jacobi nodes on [0, 1] for the weight (1 - a)^k.
    x, w = roots_jacobi(n, k, 0)
    return (x + 1.0) / 2.0, w / 2.0 ** (k + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed-coordinate (conical product) rule exact to ``degree``.

    Parameters
    ----------
    dim : int
        Simplex dimension, 0 to 3.
    degree : int
        Polynomial degree integrated exactly.

    Returns
    -------
    bary : ndarray, shape (nq, dim + 1)
        Barycentric coordinates of the quadrature points.
    weights : ndarray, shape (nq,)
        Weights normalised to sum to one.
    """
    if dim == 0:
        return np.ones((1, 1)), np.ones(1)
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported simplex dimension {dim}")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    n = max(1, int(np.ceil((degree + 1) / 2)))

    # Duffy map: x_1 = a_1, x_2 = (1 - a_1) a_2, ... with Jacobi weights
    # absorbing the Jacobian factors (1 - a_k)^(dim - k).
    rules = [_jacobi01(n, dim - 1 - k) for k in range(dim)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    a = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)

    x = np.zeros_like(a)
    remaining = np.ones(a.shape[0])
    for k in range(dim):
        x[:, k] = remaining * a[:, k]
        remaining = remaining * (1.0 - a[:, k])
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    return bary, w / w.sum()


def map_points(vertices: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Physical quadrature points for a batch of simplices.

    ``vertices`` has shape (nc, dim + 1, ambient); the result has shape
    (nc, nq, ambient).
    """
    return np.einsum("qa,cax->cqx", bary, vertices)
