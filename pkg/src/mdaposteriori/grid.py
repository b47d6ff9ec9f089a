"""Mixed-dimensional grids: subdomains, mortar interfaces and their overlaps."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .mesh import MeshError, SimplexMesh, make_mesh


class GridValidationError(ValueError):
    """An MDGrid violates one of its structural invariants."""


class CoverageError(GridValidationError):
    """The partitions of an interface do not cover the same set."""


class BoundaryTag(IntEnum):
    NONE = 0
    DIRICHLET = 1
    NEUMANN = 2
    TIP = 3
    INTERNAL = 4


@dataclass(frozen=True)
class Subdomain:
    """One subdomain of the mixed-dimensional geometry.

    ``face_tags`` holds a :class:`BoundaryTag` per face (``NONE`` on interior
    faces) and ``face_interface`` the interface id of ``INTERNAL`` faces
    (-1 elsewhere).
    """

    id: int
    mesh: SimplexMesh
    face_tags: np.ndarray
    face_interface: np.ndarray

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def faces_with_tag(self, tag: BoundaryTag) -> np.ndarray:
        return np.flatnonzero(self.face_tags == tag)


@dataclass(frozen=True)
class Overlaps:
    """Sparse overlap list between mortar cells and a neighbouring partition."""

    mortar: np.ndarray
    other: np.ndarray
    measure: np.ndarray

    def __len__(self) -> int:
        return self.mortar.size


@dataclass(frozen=True)
class MortarInterface:
    id: int
    lower_id: int
    higher_id: int
    side: str
    mortar_mesh: SimplexMesh
    higher_faces: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    overlaps_higher: Optional[Overlaps] = None
    overlaps_lower: Optional[Overlaps] = None

    @property
    def num_cells(self) -> int:
        return self.mortar_mesh.num_cells


@dataclass(frozen=True)
class MDGrid:
    ambient_dim: int
    subdomains: tuple
    interfaces: tuple
    higher_neighbors: dict
    lower_neighbors: dict

    @property
    def dim_max(self) -> int:
        return max(sd.dim for sd in self.subdomains)

    def subdomain(self, i: int) -> Subdomain:
        return self.subdomains[i]

    def interfaces_of_lower(self, i: int) -> list:
        return [e for e in self.interfaces if e.lower_id == i]

    def interfaces_of_higher(self, j: int) -> list:
        return [e for e in self.interfaces if e.higher_id == j]

    def diameter(self) -> float:
        pts = np.vstack([sd.mesh.nodes for sd in self.subdomains])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


def _segments_overlap(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Pairwise overlap lengths of collinear segments.

    ``a`` has shape (na, 2, n), ``b`` (nb, 2, n); returns (na, nb).
    """
    a0 = a[:, 0]
    ta = a[:, 1] - a0
    la = np.linalg.norm(ta, axis=1)
    da = ta / la[:, None]
    out = np.zeros((a.shape[0], b.shape[0]))
    chunk = max(1, 2_000_000 // max(b.shape[0], 1))
    for start in range(0, a.shape[0], chunk):
        sl = slice(start, start + chunk)
        rel0 = b[None, :, 0] - a0[sl, None]
        rel1 = b[None, :, 1] - a0[sl, None]
        s0 = np.einsum("abx,ax->ab", rel0, da[sl])
        s1 = np.einsum("abx,ax->ab", rel1, da[sl])
        off0 = np.linalg.norm(rel0 - s0[..., None] * da[sl, None], axis=2)
        off1 = np.linalg.norm(rel1 - s1[..., None] * da[sl, None], axis=2)
        collinear = (off0 <= tol) & (off1 <= tol)
        lo = np.maximum(0.0, np.minimum(s0, s1))
        hi = np.minimum(la[sl, None], np.maximum(s0, s1))
        out[sl] = np.where(collinear, np.clip(hi - lo, 0.0, None), 0.0)
    out[out <= tol] = 0.0
    return out


def _points_overlap(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return (d <= tol).astype(float)


def _pairwise(mortar_items: np.ndarray, other_items: np.ndarray, dim: int, tol: float) -> np.ndarray:
    if dim == 0:
        return _points_overlap(mortar_items[:, 0], other_items[:, 0], tol)
    if dim == 1:
        return _segments_overlap(mortar_items, other_items, tol)
    raise NotImplementedError("overlaps are implemented for 0-d and 1-d interfaces only")


def _check_partition(matrix: np.ndarray, row_measure, col_measure, tol, what: str) -> None:
    rows = matrix.sum(axis=1)
    cols = matrix.sum(axis=0)
    bad_r = np.flatnonzero(np.abs(rows - row_measure) > tol)
    bad_c = np.flatnonzero(np.abs(cols - col_measure) > tol)
    if bad_r.size or bad_c.size:
        raise CoverageError(
            f"coverage mismatch between mortar cells and {what}: "
            f"{bad_r.size} mortar cells and {bad_c.size} {what} not fully covered"
        )


def _to_overlaps(matrix: np.ndarray, other_index: np.ndarray) -> Overlaps:
    m, o = np.nonzero(matrix)
    return Overlaps(mortar=m, other=other_index[o], measure=matrix[m, o])


def compute_overlaps(iface: MortarInterface, grid: MDGrid, tol: Optional[float] = None) -> MortarInterface:
    """Intersect the mortar grid with the higher-side trace faces and the lower cells.

    Raises
    ------
    CoverageError
        If the three partitions do not cover the same set.
    """
    if tol is None:
        tol = 1e-10 * max(grid.diameter(), 1.0)
    mort = iface.mortar_mesh
    high = grid.subdomains[iface.higher_id].mesh
    low = grid.subdomains[iface.lower_id].mesh
    dim = mort.dim
    if iface.higher_faces.size == 0:
        raise GridValidationError(f"interface {iface.id} has no higher-dimensional faces")

    m_items = mort.nodes[mort.cells]
    h_items = high.nodes[high.faces[iface.higher_faces]]
    l_items = low.nodes[low.cells]

    w_high = _pairwise(m_items, h_items, dim, tol)
    _check_partition(w_high, mort.cell_volumes, high.face_areas[iface.higher_faces], tol, "higher faces")
    w_low = _pairwise(m_items, l_items, dim, tol)
    _check_partition(w_low, mort.cell_volumes, low.cell_volumes, tol, "lower cells")

    return dataclasses.replace(
        iface,
        overlaps_higher=_to_overlaps(w_high, iface.higher_faces),
        overlaps_lower=_to_overlaps(w_low, np.arange(low.num_cells)),
    )


def _validate_overlaps(iface: MortarInterface, grid: MDGrid) -> None:
    """Partition checks for overlap lists supplied by the caller."""
    tol = 1e-10 * max(grid.diameter(), 1.0)
    high = grid.subdomains[iface.higher_id].mesh
    low = grid.subdomains[iface.lower_id].mesh
    for ov, measure, what in (
        (iface.overlaps_higher, high.face_areas, "higher faces"),
        (iface.overlaps_lower, low.cell_volumes, "lower cells"),
    ):
        if np.any(ov.measure < 0):
            raise GridValidationError(f"interface {iface.id}: negative overlap measure")
        if ov.mortar.size and (ov.mortar.max() >= iface.num_cells or ov.other.max() >= measure.size):
            raise GridValidationError(f"interface {iface.id}: overlap index out of range")
        rows = np.bincount(ov.mortar, ov.measure, minlength=iface.num_cells)
        cols = np.bincount(ov.other, ov.measure, minlength=measure.size)
        others = iface.higher_faces if what == "higher faces" else np.arange(measure.size)
        if np.any(np.abs(rows - iface.mortar_mesh.cell_volumes) > tol) or np.any(
            np.abs(cols[others] - measure[others]) > tol
        ):
            raise CoverageError(f"coverage mismatch between mortar cells and {what} on interface {iface.id}")


def assemble_mdgrid(ambient_dim: int, subdomains: Sequence[Subdomain], interfaces: Sequence[MortarInterface]) -> MDGrid:
    """Validate the pieces, compute missing overlaps and build the MDGrid."""
    subdomains = tuple(subdomains)
    ids = [sd.id for sd in subdomains]
    if ids != list(range(len(subdomains))):
        raise GridValidationError("subdomain ids must be 0..n-1 in order")
    for sd in subdomains:
        if sd.mesh.ambient_dim != ambient_dim:
            raise GridValidationError(f"subdomain {sd.id} lives in the wrong ambient dimension")
        if sd.dim == ambient_dim and sd.mesh.num_cells and np.any(sd.mesh.signed_volumes < 0):
            c = int(np.flatnonzero(sd.mesh.signed_volumes < 0)[0])
            raise GridValidationError(f"negative volume in subdomain {sd.id}, cell {c}")
        if sd.dim == ambient_dim and np.any(sd.face_tags == BoundaryTag.TIP):
            raise GridValidationError(f"tip tags are only allowed below the ambient dimension (subdomain {sd.id})")
        if sd.face_tags.shape != (sd.mesh.num_faces,):
            raise GridValidationError(f"subdomain {sd.id}: one tag per face expected")

    higher = {i: set() for i in ids}
    lower = {i: set() for i in ids}
    checked = []
    for k, e in enumerate(interfaces):
        if e.id != k:
            raise GridValidationError("interface ids must be 0..m-1 in order")
        if e.lower_id not in higher or e.higher_id not in higher:
            raise GridValidationError(f"dangling interface {e.id}: unknown subdomain")
        lo, hi = subdomains[e.lower_id], subdomains[e.higher_id]
        if hi.dim - lo.dim != 1:
            raise GridValidationError(
                f"dimension gap of interface {e.id} is {hi.dim - lo.dim}, expected 1"
            )
        if e.mortar_mesh.dim != lo.dim:
            raise GridValidationError(f"mortar grid of interface {e.id} has the wrong dimension")
        tagged = np.flatnonzero(
            (hi.face_tags == BoundaryTag.INTERNAL) & (hi.face_interface == e.id)
        )
        if e.higher_faces.size == 0:
            e = dataclasses.replace(e, higher_faces=tagged)
        elif not np.array_equal(np.sort(e.higher_faces), tagged):
            raise GridValidationError(f"interface {e.id}: higher faces disagree with internal tags")
        higher[e.lower_id].add(e.higher_id)
        lower[e.higher_id].add(e.lower_id)
        checked.append(e)
    for sd in subdomains:
        ref = sd.face_interface[sd.face_tags == BoundaryTag.INTERNAL]
        if np.any((ref < 0) | (ref >= len(checked))):
            raise GridValidationError(f"subdomain {sd.id} tags a face with an unknown interface")

    grid = MDGrid(ambient_dim, subdomains, tuple(checked), higher, lower)
    done = []
    for e in checked:
        if e.overlaps_higher is None or e.overlaps_lower is None:
            done.append(compute_overlaps(e, grid))
        else:
            _validate_overlaps(e, grid)
            done.append(e)
    done = tuple(done)
    return dataclasses.replace(grid, interfaces=done)


def make_subdomain(id: int, mesh: SimplexMesh, face_tags=None, face_interface=None) -> Subdomain:
    nf = mesh.num_faces
    tags = np.zeros(nf, dtype=np.int64) if face_tags is None else np.asarray(face_tags, dtype=np.int64)
    iface = -np.ones(nf, dtype=np.int64) if face_interface is None else np.asarray(face_interface, dtype=np.int64)
    return Subdomain(id=id, mesh=mesh, face_tags=tags, face_interface=iface)


# --------------------------------------------------------------------------
# validation geometry
# --------------------------------------------------------------------------

FRACTURE_X = 0.5
FRACTURE_Y = (0.25, 0.75)


def _cells_for(length: float, h: float) -> int:
    n = int(round(length / h))
    if n < 1:
        raise GridValidationError(f"mesh size {h} yields zero cells on a segment of length {length}")
    return n


def _axis(pieces) -> np.ndarray:
    pts = [np.array([pieces[0][0]])]
    for a, b, n in pieces:
        pts.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(pts)


def _structured_triangulation(n_trace: int):
    """Rectangles split into two right triangles, mirrored about the fracture."""
    h = (FRACTURE_Y[1] - FRACTURE_Y[0]) / n_trace
    y0, y1 = FRACTURE_Y
    nx_half = _cells_for(FRACTURE_X, h)
    xs = _axis([(0.0, FRACTURE_X, nx_half), (FRACTURE_X, 1.0, nx_half)])
    ys = _axis([(0.0, y0, _cells_for(y0, h)), (y0, y1, n_trace), (y1, 1.0, _cells_for(1.0 - y1, h))])
    nx, ny = xs.size - 1, ys.size - 1
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    nid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    bl, br, tl, tr = nid(ix, iy), nid(ix + 1, iy), nid(ix, iy + 1), nid(ix + 1, iy + 1)
    left = (ix < nx_half)[:, None]
    t1 = np.where(left, np.column_stack([bl, br, tr]), np.column_stack([bl, br, tl]))
    t2 = np.where(left, np.column_stack([bl, tr, tl]), np.column_stack([br, tr, tl]))
    return nodes, np.vstack([t1, t2])


def _lattice_triangulation(n_trace: int):
    """Delaunay triangulation of an equilateral lattice aligned with the fracture.

    Lattice columns run parallel to the fracture at spacing ``h sqrt(3)/2``
    with node spacing ``h`` along each column, so the fracture is a lattice
    column and its edges are mesh edges. Lattice nodes too close to the
    outer boundary are replaced by boundary nodes at spacing ``h``.
    """
    from scipy.spatial import Delaunay

    y0, y1 = FRACTURE_Y
    h = (y1 - y0) / n_trace
    # a whole number of columns per half, so columns also lie on x = 0, 1
    kmax = max(1, int(round(FRACTURE_X / (h * np.sqrt(3.0) / 2.0))))
    dx = FRACTURE_X / kmax
    margin = 0.4 * h
    pts = []
    for k in range(-kmax, kmax + 1):
        x = FRACTURE_X + k * dx
        off = (abs(k) % 2) * h / 2.0
        jlo = int(np.floor((0.0 - y0 - off) / h)) - 1
        jhi = int(np.ceil((1.0 - y0 - off) / h)) + 1
        y = y0 + off + h * np.arange(jlo, jhi + 1)
        y = y[(y > margin) & (y < 1.0 - margin)]
        pts.append(np.column_stack([np.full(y.size, x), y]))
        pts.append(np.array([[x, 0.0], [x, 1.0]]))
    nodes = np.vstack(pts)
    nodes = np.unique(np.round(nodes, 14), axis=0)
    tri = Delaunay(nodes)
    cells = tri.simplices.astype(np.int64)
    # counter-clockwise orientation
    e1 = nodes[cells[:, 1]] - nodes[cells[:, 0]]
    e2 = nodes[cells[:, 2]] - nodes[cells[:, 0]]
    flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    cells[flip] = cells[flip][:, [0, 2, 1]]
    return nodes, cells


def _fracture_edges_present(nodes: np.ndarray, cells: np.ndarray) -> bool:
    on = np.isclose(nodes[:, 0], FRACTURE_X) & (nodes[:, 1] >= FRACTURE_Y[0] - 1e-12) & (
        nodes[:, 1] <= FRACTURE_Y[1] + 1e-12
    )
    ids = np.flatnonzero(on)
    ids = ids[np.argsort(nodes[ids, 1])]
    edges = set()
    for a, b in ((0, 1), (1, 2), (0, 2)):
        edges.update(map(tuple, np.sort(cells[:, [a, b]], axis=1)))
    return all(tuple(sorted((int(p), int(q)))) in edges for p, q in zip(ids[:-1], ids[1:]))


def build_validation_grid(zeta: Sequence[float], mesh_type: str = "lattice") -> MDGrid:
    """Unit square with one vertical fracture, possibly non-matching.

    Parameters
    ----------
    zeta : (h_trace, h_mortar, h_fracture)
        Cell sizes of the matrix faces along the fracture, of the two mortar
        grids and of the fracture grid. Each is rounded so that a whole
        number of cells fits on the fracture.
    mesh_type : {"lattice", "structured"}
        ``lattice`` gives nearly equilateral triangles (the two-point flux
        scheme is consistent on them); ``structured`` splits rectangles
        into right triangles.

    Subdomain 0 is the matrix (slit along the fracture), subdomain 1 the
    fracture. Interface 0 couples the left side (``minus``) and interface 1
    the right side (``plus``).
    """
    h_trace, h_mortar, h_frac = (float(z) for z in zeta)
    if min(h_trace, h_mortar, h_frac) <= 0:
        raise GridValidationError("mesh sizes must be positive")
    y0, y1 = FRACTURE_Y
    seg = y1 - y0
    n_trace = _cells_for(seg, h_trace)
    n_mortar = _cells_for(seg, h_mortar)
    n_frac = _cells_for(seg, h_frac)

    if mesh_type == "lattice":
        nodes, cells = _lattice_triangulation(n_trace)
    elif mesh_type == "structured":
        nodes, cells = _structured_triangulation(n_trace)
    else:
        raise GridValidationError(f"unknown mesh type {mesh_type!r}")
    if not _fracture_edges_present(nodes, cells):
        raise MeshError("the matrix triangulation does not conform to the fracture")

    centroid_x = nodes[cells, 0].mean(axis=1)
    cell_left = centroid_x < FRACTURE_X

    # slit: duplicate interior fracture nodes for the right-hand cells
    slit = np.flatnonzero(
        np.isclose(nodes[:, 0], FRACTURE_X)
        & (nodes[:, 1] > y0 + 1e-12)
        & (nodes[:, 1] < y1 - 1e-12)
    )
    dup = np.arange(nodes.shape[0], nodes.shape[0] + slit.size)
    remap = np.arange(nodes.shape[0])
    remap[slit] = dup
    cells = cells.copy()
    cells[~cell_left] = remap[cells[~cell_left]]
    nodes = np.vstack([nodes, nodes[slit]])

    matrix_mesh = make_mesh(2, nodes, cells)
    fc = matrix_mesh.face_centers
    bnd = matrix_mesh.boundary_faces
    tags = np.zeros(matrix_mesh.num_faces, dtype=np.int64)
    iface_of = -np.ones(matrix_mesh.num_faces, dtype=np.int64)
    on_slit = np.isclose(fc[bnd, 0], FRACTURE_X) & (fc[bnd, 1] > y0) & (fc[bnd, 1] < y1)
    tags[bnd[~on_slit]] = BoundaryTag.DIRICHLET
    tags[bnd[on_slit]] = BoundaryTag.INTERNAL
    owner_left = matrix_mesh.cell_centroids[matrix_mesh.face_cells[bnd[on_slit], 0], 0] < FRACTURE_X
    iface_of[bnd[on_slit]] = np.where(owner_left, 0, 1)
    matrix = make_subdomain(0, matrix_mesh, tags, iface_of)

    def line_mesh(n: int) -> SimplexMesh:
        y = np.linspace(y0, y1, n + 1)
        pts = np.column_stack([np.full(n + 1, FRACTURE_X), y])
        return make_mesh(1, pts, np.column_stack([np.arange(n), np.arange(1, n + 1)]))

    frac_mesh = line_mesh(n_frac)
    ftags = np.zeros(frac_mesh.num_faces, dtype=np.int64)
    ftags[frac_mesh.boundary_faces] = BoundaryTag.TIP
    fracture = make_subdomain(1, frac_mesh, ftags)

    interfaces = [
        MortarInterface(id=0, lower_id=1, higher_id=0, side="minus", mortar_mesh=line_mesh(n_mortar)),
        MortarInterface(id=1, lower_id=1, higher_id=0, side="plus", mortar_mesh=line_mesh(n_mortar)),
    ]
    return assemble_mdgrid(2, [matrix, fracture], interfaces)


# mesh-size triplets (h_trace, h_mortar, h_fracture) of the validation study
TABLE1_LEVELS = (
    (0.05000, 0.10000, 0.07143),
    (0.02500, 0.05000, 0.03571),
    (0.01250, 0.02500, 0.01852),
    (0.00625, 0.01250, 0.00926),
    (0.00313, 0.00625, 0.00467),
)

__all__ = [
    "BoundaryTag",
    "CoverageError",
    "GridValidationError",
    "MDGrid",
    "MeshError",
    "MortarInterface",
    "Overlaps",
    "Subdomain",
    "TABLE1_LEVELS",
    "assemble_mdgrid",
    "build_validation_grid",
    "compute_overlaps",
    "make_subdomain",
]
