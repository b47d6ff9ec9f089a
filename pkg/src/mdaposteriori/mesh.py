"""Simplicial meshes embedded in 2-d or 3-d ambient space.

A ``SimplexMesh`` of topological dimension ``d`` stores ``d + 1`` node
indices per cell. Face ``k`` of a cell is the facet opposite its local
vertex ``k``; this is the convention the RT0 basis relies on.

Every face carries one unit normal. For interior faces it points from
``face_cells[f, 0]`` into ``face_cells[f, 1]``; for boundary faces it points
out of the single adjacent cell. ``cell_face_signs[c, k]`` is +1 when the
stored normal of face ``k`` is outward for cell ``c`` and -1 otherwise.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np


class MeshError(ValueError):
    """Raised for malformed or degenerate meshes."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SimplexMesh:
    """Simplicial mesh with derived geometry.

    Only ``dim``, ``nodes`` and ``cells`` are primary; everything else is
    filled in by :func:`compute_geometry`.
    """

    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    faces: Optional[np.ndarray] = None
    cell_faces: Optional[np.ndarray] = None
    cell_face_signs: Optional[np.ndarray] = None
    face_cells: Optional[np.ndarray] = None
    cell_volumes: Optional[np.ndarray] = None
    cell_centroids: Optional[np.ndarray] = None
    cell_diameters: Optional[np.ndarray] = None
    face_areas: Optional[np.ndarray] = None
    face_normals: Optional[np.ndarray] = None
    face_centers: Optional[np.ndarray] = None
    signed_volumes: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ambient_dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_faces(self) -> int:
        return 0 if self.faces is None else self.faces.shape[0]

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    def cell_vertices(self) -> np.ndarray:
        """Node coordinates per cell, shape (nc, dim + 1, ambient)."""
        return self.nodes[self.cells]


def _gram_measure(edges: np.ndarray) -> np.ndarray:
    # edges: (n, k, ambient) -> k-dimensional measure of the spanned simplex
    k = edges.shape[1]
    if k == 0:
        return np.ones(edges.shape[0])
    gram = np.einsum("nix,njx->nij", edges, edges)
    det = np.linalg.det(gram)
    return np.sqrt(np.clip(det, 0.0, None)) / factorial(k)


def _diameters(vertices: np.ndarray) -> np.ndarray:
    nv = vertices.shape[1]
    if nv < 2:
        return np.zeros(vertices.shape[0])
    diam = np.zeros(vertices.shape[0])
    for a in range(nv):
        for b in range(a + 1, nv):
            diam = np.maximum(diam, np.linalg.norm(vertices[:, a] - vertices[:, b], axis=1))
    return diam


def _orthogonal_component(w: np.ndarray, span: np.ndarray) -> np.ndarray:
    # Remove from w (n, ambient) its projection onto the rows of span (n, k, ambient).
    if span.shape[1] == 0:
        return w
    gram = np.einsum("nix,njx->nij", span, span)
    rhs = np.einsum("nix,nx->ni", span, w)
    coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
    return w - np.einsum("ni,nix->nx", coef, span)


def compute_geometry(mesh: SimplexMesh, rel_tol: float = 1e-12) -> SimplexMesh:
    """Return a copy of ``mesh`` with all derived fields computed.

    Raises
    ------
    MeshError
        If a cell is degenerate (zero measure) or a face is shared by more
        than two cells.
    """
    dim = int(mesh.dim)
    nodes = np.asarray(mesh.nodes, dtype=float)
    cells = np.asarray(mesh.cells, dtype=np.int64)
    if nodes.ndim != 2 or nodes.shape[1] not in (1, 2, 3):
        raise MeshError("nodes must be an (n, ambient) array with ambient in {1, 2, 3}")
    if cells.ndim != 2 or cells.shape[1] != dim + 1:
        raise MeshError(f"a {dim}-d mesh needs {dim + 1} nodes per cell")
    if dim > nodes.shape[1]:
        raise MeshError("mesh dimension exceeds ambient dimension")
    if cells.size and (cells.min() < 0 or cells.max() >= nodes.shape[0]):
        raise MeshError("cell refers to a missing node")

    nc = cells.shape[0]
    verts = nodes[cells]
    edges = verts[:, 1:] - verts[:, :1]

    if dim == 0:
        volumes = np.ones(nc)
        signed = volumes.copy()
    else:
        volumes = _gram_measure(edges)
        if dim == nodes.shape[1]:
            signed = np.linalg.det(edges) / factorial(dim)
        else:
            signed = volumes.copy()
    diam = _diameters(verts)
    scale = np.where(diam > 0, diam, 1.0) ** max(dim, 1)
    bad = np.flatnonzero(volumes <= rel_tol * scale) if dim > 0 else np.array([], dtype=int)
    if bad.size:
        raise MeshError(f"degenerate simplex: cell {int(bad[0])} has zero measure")
    centroids = verts.mean(axis=1)

    if dim == 0:
        empty_i = np.zeros((0, 0), dtype=np.int64)
        derived = dict(
            faces=empty_i,
            cell_faces=np.zeros((nc, 0), dtype=np.int64),
            cell_face_signs=np.zeros((nc, 0), dtype=np.int64),
            face_cells=np.zeros((0, 2), dtype=np.int64),
            face_areas=np.zeros(0),
            face_normals=np.zeros((0, nodes.shape[1])),
            face_centers=np.zeros((0, nodes.shape[1])),
        )
    else:
        derived = _faces(nodes, cells, dim)

    out = dataclasses.replace(
        mesh,
        dim=dim,
        nodes=_readonly(nodes),
        cells=_readonly(cells),
        cell_volumes=_readonly(volumes),
        signed_volumes=_readonly(signed),
        cell_centroids=_readonly(centroids),
        cell_diameters=_readonly(diam),
        **{k: _readonly(v) for k, v in derived.items()},
    )
    return out


def _faces(nodes: np.ndarray, cells: np.ndarray, dim: int) -> dict:
    nc = cells.shape[0]
    nloc = dim + 1
    # local face k = all local vertices except k
    local = np.array([[j for j in range(nloc) if j != k] for k in range(nloc)])
    cf_nodes = cells[:, local]  # (nc, nloc, dim)
    keys = np.sort(cf_nodes.reshape(-1, dim), axis=1)
    faces, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: a face is shared by more than two cells")
    nf = faces.shape[0]
    cell_faces = inverse.reshape(nc, nloc)

    # first and second occurrence of each face
    order = np.argsort(inverse, kind="stable")
    sorted_faces = inverse[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = sorted_faces[1:] != sorted_faces[:-1]
    face_cells = -np.ones((nf, 2), dtype=np.int64)
    face_cells[sorted_faces[first], 0] = order[first] // nloc
    face_cells[sorted_faces[~first], 1] = order[~first] // nloc

    fverts = nodes[faces]
    face_centers = fverts.mean(axis=1)
    fedges = fverts[:, 1:] - fverts[:, :1]
    face_areas = _gram_measure(fedges)

    # outward normal of face k of the owning cell: component of
    # (face center - opposite vertex) orthogonal to the face.
    owner = face_cells[:, 0]
    owner_local = np.argmax(cell_faces[owner] == np.arange(nf)[:, None], axis=1)
    opposite = nodes[cells[owner, owner_local]]
    w = _orthogonal_component(face_centers - opposite, fedges)
    normals = w / np.linalg.norm(w, axis=1)[:, None]

    signs = np.where(face_cells[cell_faces, 0] == np.arange(nc)[:, None], 1, -1)
    return dict(
        faces=faces,
        cell_faces=cell_faces,
        cell_face_signs=signs.astype(np.int64),
        face_cells=face_cells,
        face_areas=face_areas,
        face_normals=normals,
        face_centers=face_centers,
    )


def make_mesh(dim: int, nodes, cells) -> SimplexMesh:
    """Build a mesh from raw arrays and compute its geometry."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, dim + 1)
    return compute_geometry(SimplexMesh(dim=dim, nodes=nodes, cells=cells))


def closed_surface_defect(mesh: SimplexMesh) -> np.ndarray:
    """Per-cell norm of the sum of outward ``area * normal`` vectors."""
    if mesh.dim == 0:
        return np.zeros(mesh.num_cells)
    vec = (
        mesh.cell_face_signs[..., None]
        * mesh.face_areas[mesh.cell_faces][..., None]
        * mesh.face_normals[mesh.cell_faces]
    ).sum(axis=1)
    return np.linalg.norm(vec, axis=1)
