"""Problem data for mixed-dimensional Darcy flow."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import BoundaryTag, MDGrid
from .quadrature import map_points, simplex_rule

Field = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


class DataError(ValueError):
    """Problem data are missing or violate their invariants."""


@dataclass(frozen=True)
class ProblemData:
    """Coefficients, sources and boundary data.

    Parameters
    ----------
    K : list of arrays
        Per subdomain, either per-cell scalars of shape (nc,) or per-cell
        tensors of shape (nc, n, n) in ambient coordinates.
    kappa : list of arrays
        Per interface, positive normal permeability per mortar cell.
    f : list
        Per subdomain, a scalar, per-cell constants or a callable taking
        points of shape (m, n) and returning (m,) values.
    g_D, g_N : list
        Per subdomain, ``None``, a scalar, per-face values or a callable of
        points. Dirichlet values are pressures; Neumann values are outward
        flux densities.
    """

    K: Sequence[np.ndarray]
    kappa: Sequence[np.ndarray]
    f: Sequence[Field]
    g_D: Sequence[Optional[Field]]
    g_N: Sequence[Optional[Field]]

    def K_tensor(self, i: int, ambient_dim: int) -> np.ndarray:
        k = np.asarray(self.K[i], dtype=float)
        if k.ndim == 1:
            return k[:, None, None] * np.eye(ambient_dim)[None]
        return k

    def is_scalar(self, i: int) -> bool:
        return np.asarray(self.K[i]).ndim == 1


def make_problem(grid: MDGrid, K=1.0, kappa=1.0, f=0.0, g_D=None, g_N=None) -> ProblemData:
    """Broadcast scalar or per-subdomain inputs into a validated ProblemData."""

    def per_sd(value, name):
        if isinstance(value, (list, tuple)):
            if len(value) != len(grid.subdomains):
                raise DataError(f"{name}: one entry per subdomain expected")
            return list(value)
        return [value] * len(grid.subdomains)

    Ks = []
    for sd, k in zip(grid.subdomains, per_sd(K, "K")):
        k = np.asarray(k, dtype=float)
        Ks.append(np.full(sd.mesh.num_cells, float(k)) if k.ndim == 0 else k)
    if isinstance(kappa, (list, tuple)):
        kap = [np.asarray(v, dtype=float) * np.ones(e.num_cells) for v, e in zip(kappa, grid.interfaces)]
    else:
        kap = [np.full(e.num_cells, float(kappa)) for e in grid.interfaces]
    data = ProblemData(Ks, kap, per_sd(f, "f"), per_sd(g_D, "g_D"), per_sd(g_N, "g_N"))
    validate_data(grid, data)
    return data


def validate_data(grid: MDGrid, data: ProblemData) -> None:
    """Check shapes, symmetry and positive definiteness."""
    if len(data.K) != len(grid.subdomains) or len(data.f) != len(grid.subdomains):
        raise DataError("K and f need one entry per subdomain")
    if len(data.kappa) != len(grid.interfaces):
        raise DataError("kappa needs one entry per interface")
    n = grid.ambient_dim
    for sd in grid.subdomains:
        k = np.asarray(data.K[sd.id], dtype=float)
        nc = sd.mesh.num_cells
        if k.ndim == 1:
            if k.shape != (nc,) or np.any(~(k > 0)):
                raise DataError(f"K of subdomain {sd.id} must be positive with one value per cell")
        else:
            if k.shape != (nc, n, n):
                raise DataError(f"K tensor of subdomain {sd.id} has shape {k.shape}, expected {(nc, n, n)}")
            if not np.allclose(k, np.swapaxes(k, 1, 2), rtol=1e-12, atol=0.0):
                raise DataError(f"K tensor of subdomain {sd.id} is not symmetric")
            if np.any(np.linalg.eigvalsh(k)[:, 0] <= 0):
                raise DataError(f"K tensor of subdomain {sd.id} is not positive definite")
        tags = sd.face_tags
        if np.any(tags == BoundaryTag.DIRICHLET) and data.g_D[sd.id] is None:
            raise DataError(f"subdomain {sd.id} has Dirichlet faces but no g_D")
        if np.any(tags == BoundaryTag.NEUMANN) and data.g_N[sd.id] is None:
            raise DataError(f"subdomain {sd.id} has Neumann faces but no g_N")
    for e in grid.interfaces:
        kap = np.asarray(data.kappa[e.id], dtype=float)
        if kap.shape != (e.num_cells,) or np.any(~(kap > 0)):
            raise DataError(f"kappa of interface {e.id} must be positive with one value per mortar cell")


def face_values(value: Field, points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Evaluate boundary data on the given faces (``points`` are their centers)."""
    if value is None:
        raise DataError("boundary data missing")
    if callable(value):
        return np.asarray(value(points), dtype=float).reshape(-1)
    v = np.asarray(value, dtype=float)
    if v.ndim == 0:
        return np.full(faces.size, float(v))
    return v[faces]


def integrate_field(value: Field, grid: MDGrid, i: int, degree: int = 4) -> np.ndarray:
    """Cell integrals of a scalar field over subdomain ``i``."""
    mesh = grid.subdomains[i].mesh
    vol = mesh.cell_volumes
    if not callable(value):
        v = np.asarray(value, dtype=float)
        return (np.full(mesh.num_cells, float(v)) if v.ndim == 0 else v) * vol
    bary, w = simplex_rule(mesh.dim, degree)
    pts = map_points(mesh.cell_vertices(), bary)
    vals = np.asarray(value(pts.reshape(-1, mesh.ambient_dim)), dtype=float).reshape(pts.shape[:2])
    return (vals @ w) * vol


def evaluate_field(value: Field, grid: MDGrid, i: int, points: np.ndarray) -> np.ndarray:
    """Pointwise values at ``points`` of shape (nc, nq, n)."""
    if callable(value):
        flat = points.reshape(-1, points.shape[-1])
        return np.asarray(value(flat), dtype=float).reshape(points.shape[:2])
    v = np.asarray(value, dtype=float)
    nc, nq = points.shape[:2]
    if v.ndim == 0:
        return np.full((nc, nq), float(v))
    return np.repeat(v[:, None], nq, axis=1)


def norm_K(data: ProblemData, grid: MDGrid, i: int, convention: str = "pointwise") -> np.ndarray:
    """Per-cell norm of the permeability.

    ``pointwise`` gives the largest eigenvalue (the scalar itself for
    isotropic data); ``integrated`` gives the L2(K) norm of the constant
    field, i.e. the pointwise Frobenius norm times sqrt(|K|) (the plain
    scalar for scalar data).
    """
    vol = grid.subdomains[i].mesh.cell_volumes
    k = np.asarray(data.K[i], dtype=float)
    if convention == "pointwise":
        return k if k.ndim == 1 else np.linalg.eigvalsh(k)[:, -1]
    if convention == "integrated":
        pt = k if k.ndim == 1 else np.linalg.norm(k, axis=(1, 2))
        return pt * np.sqrt(vol)
    raise ValueError(f"unknown norm convention {convention!r}")


def norm_K_inv_sqrt(data: ProblemData, grid: MDGrid, i: int, convention: str = "pointwise") -> np.ndarray:
    """Per-cell norm of K^(-1/2), the weight ``c_K`` of the residual estimator."""
    vol = grid.subdomains[i].mesh.cell_volumes
    k = np.asarray(data.K[i], dtype=float)
    if k.ndim == 1:
        pt = k ** -0.5
        fro = pt
    else:
        lam = np.linalg.eigvalsh(k)
        pt = lam[:, 0] ** -0.5
        fro = np.sqrt(np.sum(1.0 / lam, axis=1))
    if convention == "pointwise":
        return pt
    if convention == "integrated":
        return fro * np.sqrt(vol)
    raise ValueError(f"unknown norm convention {convention!r}")


def norm_kappa(data: ProblemData, grid: MDGrid, e: int, convention: str = "pointwise") -> np.ndarray:
    kap = np.asarray(data.kappa[e], dtype=float)
    if convention == "pointwise":
        return kap
    if convention == "integrated":
        return kap * np.sqrt(grid.interfaces[e].mortar_mesh.cell_volumes)
    raise ValueError(f"unknown norm convention {convention!r}")
