"""Conforming piecewise-linear pressure reconstruction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .discretize import DiscreteSolution, rt0_evaluate
from .grid import BoundaryTag, MDGrid
from .mesh import SimplexMesh
from .problem import ProblemData


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True)
class NodalP1Pressure:
    """Nodal values per subdomain; affine inside each cell."""

    meshes: List[SimplexMesh]
    values: List[np.ndarray]


def cell_gradients(mesh: SimplexMesh, nodal: np.ndarray) -> np.ndarray:
    """Constant gradient of the affine interpolant in every cell, shape (nc, n).

    For cells of lower dimension than the ambient space this is the
    tangential gradient.
    """
    nc, n = mesh.num_cells, mesh.ambient_dim
    if mesh.dim == 0:
        return np.zeros((nc, n))
    X = mesh.cell_vertices()
    E = X[:, 1:] - X[:, :1]  # (nc, d, n)
    dv = nodal[mesh.cells[:, 1:]] - nodal[mesh.cells[:, :1]]  # (nc, d)
    gram = np.einsum("cin,cjn->cij", E, E)
    coef = np.linalg.solve(gram, dv[..., None])[..., 0]
    return np.einsum("ci,cin->cn", coef, E)


def _dirichlet_node_values(sd, data: ProblemData):
    mesh = sd.mesh
    faces = sd.faces_with_tag(BoundaryTag.DIRICHLET)
    if faces.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    g = data.g_D[sd.id]
    nodes = np.unique(mesh.faces[faces])
    if callable(g):
        return nodes, np.asarray(g(mesh.nodes[nodes]), dtype=float).reshape(-1)
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return nodes, np.full(nodes.size, float(g))
    # per-face data: average over the Dirichlet faces touching each node
    acc = np.zeros(mesh.num_nodes)
    cnt = np.zeros(mesh.num_nodes)
    for k in range(mesh.faces.shape[1]):
        np.add.at(acc, mesh.faces[faces, k], g[faces])
        np.add.at(cnt, mesh.faces[faces, k], 1.0)
    return nodes, acc[nodes] / cnt[nodes]


def reconstruct_pressure(grid: MDGrid, sol: DiscreteSolution, data: ProblemData) -> NodalP1Pressure:
    """Average locally reconstructed affine pressures at the mesh nodes.

    In every cell the affine function ``p_K + grad(phi) . (x - x_C)`` with
    ``grad(phi) = -K^-1 u_h(x_C)`` is formed; nodal values are the
    volume-weighted averages over the cells sharing the node. External
    Dirichlet nodes of top-dimensional subdomains take the boundary data.
    """
    if sol.rt0 is None:
        raise ReconstructionError("RT0 coefficients missing; call rt0_extend_fluxes first")
    values = []
    meshes = []
    dim_top = grid.ambient_dim
    for sd in grid.subdomains:
        mesh = sd.mesh
        meshes.append(mesh)
        p = np.asarray(sol.p[sd.id], dtype=float)
        if mesh.dim == 0:
            nodal = np.full(mesh.num_nodes, np.nan)
            nodal[mesh.cells[:, 0]] = p
        else:
            xc = mesh.cell_centroids
            u_c = rt0_evaluate(mesh, sol.rt0[sd.id], xc[:, None, :])[:, 0]
            K_inv = np.linalg.inv(data.K_tensor(sd.id, grid.ambient_dim))
            grad = -np.einsum("cij,cj->ci", K_inv, u_c)
            delta = mesh.cell_vertices() - xc[:, None, :]
            local = p[:, None] + np.einsum("ci,cvi->cv", grad, delta)
            w = np.repeat(mesh.cell_volumes[:, None], mesh.dim + 1, axis=1)
            num = np.bincount(mesh.cells.ravel(), weights=(w * local).ravel(), minlength=mesh.num_nodes)
            den = np.bincount(mesh.cells.ravel(), weights=w.ravel(), minlength=mesh.num_nodes)
            nodal = np.divide(num, den, out=np.full(mesh.num_nodes, np.nan), where=den > 0)
            if sd.dim == dim_top:
                nodes, g = _dirichlet_node_values(sd, data)
                nodal[nodes] = g
        if np.any(np.isnan(nodal)):
            raise ReconstructionError(f"empty node patch in subdomain {sd.id}")
        values.append(nodal)
    return NodalP1Pressure(meshes, values)


def _barycentric(mesh: SimplexMesh, cell: int, point) -> tuple:
    X = mesh.nodes[mesh.cells[cell]]
    point = np.asarray(point, dtype=float)
    if mesh.dim == 0:
        return np.ones(1), float(np.linalg.norm(point - X[0]))
    E = (X[1:] - X[0]).T
    lam, *_ = np.linalg.lstsq(E, point - X[0], rcond=None)
    off = float(np.linalg.norm(E @ lam - (point - X[0])))
    return np.concatenate([[1.0 - lam.sum()], lam]), off


def evaluate_p1(rec: NodalP1Pressure, subdomain: int, cell: int, point, tol: float = 1e-10) -> float:
    """Value of the reconstructed pressure at a point inside a given cell."""
    mesh = rec.meshes[subdomain]
    bary, off = _barycentric(mesh, cell, point)
    scale = max(float(mesh.cell_diameters[cell]), 1.0)
    if np.any(bary < -tol) or off > tol * scale:
        raise ReconstructionError(f"point {tuple(np.atleast_1d(point))} lies outside cell {cell}")
    return float(bary @ rec.values[subdomain][mesh.cells[cell]])


def gradient_p1(rec: NodalP1Pressure, subdomain: int, cell: int) -> np.ndarray:
    mesh = rec.meshes[subdomain]
    sel = slice(cell, cell + 1)
    sub = SimplexMesh(dim=mesh.dim, nodes=mesh.nodes, cells=mesh.cells[sel])
    return cell_gradients(sub, rec.values[subdomain])[0]


def face_midpoint_values(mesh: SimplexMesh, nodal: np.ndarray) -> np.ndarray:
    """Mean of the affine function over each face (its value at the face centroid)."""
    if mesh.num_faces == 0:
        return np.zeros(0)
    return nodal[mesh.faces].mean(axis=1)


def cell_mean_values(mesh: SimplexMesh, nodal: np.ndarray) -> np.ndarray:
    return nodal[mesh.cells].mean(axis=1)
