"""Two-point flux and RT0-P0 discretizations of mixed-dimensional Darcy flow.

Face fluxes are integrated fluxes along the stored face normal. Mortar
unknowns are flux densities, positive when fluid leaves the
higher-dimensional subdomain towards the lower-dimensional one.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .grid import BoundaryTag, MDGrid
from .mesh import SimplexMesh
from .problem import DataError, ProblemData, face_values, integrate_field, validate_data
from .quadrature import map_points, simplex_rule

FACE_FLUX, CELL_PRESSURE, MORTAR = 0, 1, 2


class AssemblyError(ValueError):
    """The discrete problem cannot be set up."""


class SolverError(RuntimeError):
    """The linear system could not be solved to the requested accuracy."""


@dataclass(frozen=True)
class LinearSystem:
    """Assembled sparse system together with the maps needed to scatter back.

    ``dof_kind``, ``dof_owner`` and ``dof_local`` describe every global
    unknown: its kind (face flux, cell pressure or mortar), the subdomain or
    interface it belongs to, and its local index there. All face fluxes are
    recovered as ``flux_op @ x + flux_const``.
    """

    method: str
    matrix: sps.csr_matrix
    rhs: np.ndarray
    dof_kind: np.ndarray
    dof_owner: np.ndarray
    dof_local: np.ndarray
    flux_op: sps.csr_matrix
    flux_const: np.ndarray
    face_offsets: np.ndarray
    cell_offsets: np.ndarray
    mortar_offsets: np.ndarray

    @property
    def size(self) -> int:
        return self.rhs.size


@dataclass(frozen=True)
class DiscreteSolution:
    method: str
    p: List[np.ndarray]
    flux: List[np.ndarray]
    lam: List[np.ndarray]
    rt0: Optional[List[np.ndarray]] = None
    residual: float = 0.0


# --------------------------------------------------------------------------
# shared pieces
# --------------------------------------------------------------------------


def _offsets(sizes) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def _check_tags(grid: MDGrid) -> None:
    has_dirichlet = False
    for sd in grid.subdomains:
        mesh = sd.mesh
        if mesh.num_faces == 0:
            continue
        bnd = mesh.boundary_faces
        untagged = bnd[sd.face_tags[bnd] == BoundaryTag.NONE]
        if untagged.size:
            raise AssemblyError(f"missing boundary tag on face {int(untagged[0])} of subdomain {sd.id}")
        has_dirichlet |= bool(np.any(sd.face_tags[bnd] == BoundaryTag.DIRICHLET))
    if not has_dirichlet:
        raise AssemblyError("singular system (no Dirichlet boundary)")


def _divergence(mesh: SimplexMesh) -> sps.csr_matrix:
    """Cell-by-face matrix of outward signs."""
    nc = mesh.num_cells
    if mesh.num_faces == 0:
        return sps.csr_matrix((nc, 0))
    rows = np.repeat(np.arange(nc), mesh.dim + 1)
    return sps.csr_matrix(
        (mesh.cell_face_signs.ravel().astype(float), (rows, mesh.cell_faces.ravel())),
        shape=(nc, mesh.num_faces),
    )


def _mortar_face_matrix(grid: MDGrid, mortar_off: np.ndarray, face_off: np.ndarray) -> sps.csr_matrix:
    """Integrated face flux produced by unit mortar densities (overlap measures)."""
    rows, cols, vals = [], [], []
    for e in grid.interfaces:
        ov = e.overlaps_higher
        rows.append(face_off[e.higher_id] + ov.other)
        cols.append(mortar_off[e.id] + ov.mortar)
        vals.append(ov.measure)
    n_f, n_m = int(face_off[-1]), int(mortar_off[-1])
    if not rows:
        return sps.csr_matrix((n_f, n_m))
    return sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_f, n_m)
    )


def _jump_matrix(grid: MDGrid, mortar_off: np.ndarray, cell_off: np.ndarray) -> sps.csr_matrix:
    """Integrated jump source per lower cell produced by unit mortar densities."""
    rows, cols, vals = [], [], []
    for e in grid.interfaces:
        ov = e.overlaps_lower
        rows.append(cell_off[e.lower_id] + ov.other)
        cols.append(mortar_off[e.id] + ov.mortar)
        vals.append(ov.measure)
    n_c, n_m = int(cell_off[-1]), int(mortar_off[-1])
    if not rows:
        return sps.csr_matrix((n_c, n_m))
    return sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_c, n_m)
    )


def _source_integrals(grid: MDGrid, data: ProblemData, degree: int = 4) -> np.ndarray:
    return np.concatenate([integrate_field(data.f[sd.id], grid, sd.id, degree) for sd in grid.subdomains])


def _boundary_data(grid: MDGrid, data: ProblemData, face_off: np.ndarray):
    """Dirichlet pressures and prescribed integrated Neumann fluxes on all faces."""
    n_f = int(face_off[-1])
    gD = np.zeros(n_f)
    flux_nm = np.zeros(n_f)
    for sd in grid.subdomains:
        mesh = sd.mesh
        dir_f = sd.faces_with_tag(BoundaryTag.DIRICHLET)
        if dir_f.size:
            gD[face_off[sd.id] + dir_f] = face_values(data.g_D[sd.id], mesh.face_centers[dir_f], dir_f)
        neu_f = sd.faces_with_tag(BoundaryTag.NEUMANN)
        if neu_f.size:
            g = face_values(data.g_N[sd.id], mesh.face_centers[neu_f], neu_f)
            flux_nm[face_off[sd.id] + neu_f] = g * mesh.face_areas[neu_f]
    return gD, flux_nm


def _block_diag(mats, shape) -> sps.csr_matrix:
    if not mats:
        return sps.csr_matrix(shape)
    return sps.block_diag(mats, format="csr")


def _dof_arrays(blocks):
    kind = np.concatenate([np.full(n, k) for k, _, n in blocks]) if blocks else np.zeros(0, int)
    owner = np.concatenate([np.full(n, o) for _, o, n in blocks]) if blocks else np.zeros(0, int)
    local = np.concatenate([np.arange(n) for _, _, n in blocks]) if blocks else np.zeros(0, int)
    return kind.astype(np.int64), owner.astype(np.int64), local.astype(np.int64)


# --------------------------------------------------------------------------
# TPFA
# --------------------------------------------------------------------------


def half_transmissibilities(mesh: SimplexMesh, K: np.ndarray) -> np.ndarray:
    """Per (cell, local face): |F| n.K.(x_F - x_C) / |x_F - x_C|^2, outward n."""
    if mesh.num_faces == 0:
        return np.zeros((mesh.num_cells, 0))
    n_out = mesh.face_normals[mesh.cell_faces] * mesh.cell_face_signs[..., None]
    dist = mesh.face_centers[mesh.cell_faces] - mesh.cell_centroids[:, None, :]
    kd = np.einsum("cij,ckj->cki", K, dist)
    t = mesh.face_areas[mesh.cell_faces] * np.einsum("cki,cki->ck", n_out, kd) / np.einsum(
        "cki,cki->ck", dist, dist
    )
    if np.any(t <= 0):
        raise AssemblyError("non-positive half transmissibility; the mesh is not suited for TPFA")
    return t


def assemble_tpfa(grid: MDGrid, data: ProblemData, source_degree: int = 4) -> LinearSystem:
    """Cell-centred two-point flux scheme with mortar coupling.

    Unknowns are cell pressures followed by mortar densities. For each
    mortar/face overlap the higher-side half transmissibility (restricted
    to the overlap) and ``kappa * overlap`` are combined harmonically.
    """
    validate_data(grid, data)
    _check_tags(grid)
    sds, ifs = grid.subdomains, grid.interfaces
    face_off = _offsets([sd.mesh.num_faces for sd in sds])
    cell_off = _offsets([sd.mesh.num_cells for sd in sds])
    mort_off = _offsets([e.num_cells for e in ifs])
    n_p, n_m, n_f = int(cell_off[-1]), int(mort_off[-1]), int(face_off[-1])
    N = n_p + n_m

    gD, flux_nm = _boundary_data(grid, data, face_off)
    rows, cols, vals = [], [], []
    const = flux_nm.copy()
    half_t = []
    for sd in sds:
        mesh = sd.mesh
        if mesh.num_faces == 0:
            half_t.append(np.zeros((mesh.num_cells, 0)))
            continue
        t = half_transmissibilities(mesh, data.K_tensor(sd.id, grid.ambient_dim))
        half_t.append(t)
        t_face = np.zeros((mesh.num_faces, 2))
        owner_slot = np.where(mesh.cell_face_signs > 0, 0, 1)
        t_face[mesh.cell_faces.ravel(), owner_slot.ravel()] = t.ravel()
        fc = mesh.face_cells
        inner = mesh.interior_faces
        T = t_face[inner, 0] * t_face[inner, 1] / (t_face[inner, 0] + t_face[inner, 1])
        gf = face_off[sd.id] + inner
        rows += [gf, gf]
        cols += [cell_off[sd.id] + fc[inner, 0], cell_off[sd.id] + fc[inner, 1]]
        vals += [T, -T]
        dir_f = sd.faces_with_tag(BoundaryTag.DIRICHLET)
        gf = face_off[sd.id] + dir_f
        rows.append(gf)
        cols.append(cell_off[sd.id] + fc[dir_f, 0])
        vals.append(t_face[dir_f, 0])
        const[gf] -= t_face[dir_f, 0] * gD[gf]
    P = _mortar_face_matrix(grid, mort_off, face_off)
    flux_op = sps.hstack(
        [
            sps.csr_matrix(
                (np.concatenate(vals) if vals else [], (np.concatenate(rows) if rows else [], np.concatenate(cols) if cols else [])),
                shape=(n_f, n_p),
            ),
            P,
        ],
        format="csr",
    )

    D = _block_diag([_divergence(sd.mesh) for sd in sds], (n_p, n_f))
    J = _jump_matrix(grid, mort_off, cell_off)
    mass = D @ flux_op - sps.hstack([sps.csr_matrix((n_p, n_p)), J], format="csr")
    rhs_mass = _source_integrals(grid, data, source_degree) - D @ const

    # mortar rows: |m| lam - sum Teff (p_K - Pi p_lower) = 0
    mrows, mcols, mvals = [], [], []
    for e in ifs:
        hi, lo = sds[e.higher_id], sds[e.lower_id]
        mesh = hi.mesh
        kap = np.asarray(data.kappa[e.id], dtype=float)
        area_m = e.mortar_mesh.cell_volumes
        ov = e.overlaps_higher
        cell = mesh.face_cells[ov.other, 0]
        loc = np.argmax(mesh.cell_faces[cell] == ov.other[:, None], axis=1)
        t = half_t[hi.id][cell, loc] * ov.measure / mesh.face_areas[ov.other]
        teff = 1.0 / (1.0 / t + 1.0 / (kap[ov.mortar] * ov.measure))
        r = n_p + mort_off[e.id] + ov.mortar
        mrows.append(r)
        mcols.append(cell_off[hi.id] + cell)
        mvals.append(-teff)
        sum_teff = np.bincount(ov.mortar, weights=teff, minlength=e.num_cells)
        ol = e.overlaps_lower
        mrows.append(n_p + mort_off[e.id] + ol.mortar)
        mcols.append(cell_off[lo.id] + ol.other)
        mvals.append(sum_teff[ol.mortar] * ol.measure / area_m[ol.mortar])
        mrows.append(n_p + mort_off[e.id] + np.arange(e.num_cells))
        mcols.append(n_p + mort_off[e.id] + np.arange(e.num_cells))
        mvals.append(area_m)
    mort = sps.csr_matrix(
        (
            np.concatenate(mvals) if mvals else [],
            (np.concatenate(mrows) - n_p if mrows else [], np.concatenate(mcols) if mcols else []),
        ),
        shape=(n_m, N),
    )
    matrix = sps.vstack([mass, mort], format="csr")
    rhs = np.concatenate([rhs_mass, np.zeros(n_m)])

    blocks = [(CELL_PRESSURE, sd.id, sd.mesh.num_cells) for sd in sds]
    blocks += [(MORTAR, e.id, e.num_cells) for e in ifs]
    kind, owner, local = _dof_arrays(blocks)
    return LinearSystem(
        "tpfa", matrix, rhs, kind, owner, local, flux_op, const, face_off, cell_off, mort_off
    )


# --------------------------------------------------------------------------
# RT0-P0
# --------------------------------------------------------------------------


def rt0_mass_matrices(mesh: SimplexMesh, K_inv: np.ndarray) -> np.ndarray:
    """Local matrices int_K K^-1 psi_a . psi_b for the outward unit-flux basis.

    ``psi_a = (x - x_a) / (d |K|)`` is the basis function of the face
    opposite local vertex ``a``. The integrand is quadratic, so a degree-2
    rule is exact.
    """
    d = mesh.dim
    bary, w = simplex_rule(d, 2)
    X = mesh.cell_vertices()
    pts = map_points(X, bary)
    diff = pts[:, :, None, :] - X[:, None, :, :]  # (nc, nq, d+1, n)
    kd = np.einsum("cij,cqbj->cqbi", K_inv, diff)
    loc = np.einsum("q,cqai,cqbi->cab", w, diff, kd)
    vol = mesh.cell_volumes
    return loc * (vol / (d * vol) ** 2)[:, None, None]


def assemble_rt0p0(grid: MDGrid, data: ProblemData, source_degree: int = 4) -> LinearSystem:
    """Mixed RT0-P0 scheme in symmetric saddle-point form.

    Flux unknowns live on interior and Dirichlet faces; fluxes on internal
    faces are substituted by the mortar extension and Neumann or tip fluxes
    are imposed. With ``F = E y + c`` for ``y = [free fluxes, mortars]``
    the system reads

        [E^T A E + M_lam   -B^T] [y]   [-E^T (A c + b_D)]
        [-B                  0 ] [p] = [-(f - D c)      ]

    where ``B = D E - J`` and ``M_lam = diag(|m| / kappa)``.
    """
    validate_data(grid, data)
    _check_tags(grid)
    sds, ifs = grid.subdomains, grid.interfaces
    face_off = _offsets([sd.mesh.num_faces for sd in sds])
    cell_off = _offsets([sd.mesh.num_cells for sd in sds])
    mort_off = _offsets([e.num_cells for e in ifs])
    n_p, n_m, n_f = int(cell_off[-1]), int(mort_off[-1]), int(face_off[-1])

    gD, flux_nm = _boundary_data(grid, data, face_off)
    free = []
    b_D = np.zeros(n_f)
    A_blocks = []
    for sd in sds:
        mesh = sd.mesh
        tags = sd.face_tags
        free.append(face_off[sd.id] + np.flatnonzero((tags == BoundaryTag.NONE) | (tags == BoundaryTag.DIRICHLET)))
        dir_f = sd.faces_with_tag(BoundaryTag.DIRICHLET)
        b_D[face_off[sd.id] + dir_f] = gD[face_off[sd.id] + dir_f]
        if mesh.num_faces == 0:
            A_blocks.append(sps.csr_matrix((0, 0)))
            continue
        K_inv = np.linalg.inv(data.K_tensor(sd.id, grid.ambient_dim))
        loc = rt0_mass_matrices(mesh, K_inv)
        s = mesh.cell_face_signs.astype(float)
        loc = loc * s[:, :, None] * s[:, None, :]
        nl = mesh.dim + 1
        r = np.repeat(mesh.cell_faces, nl, axis=1).ravel()
        c = np.tile(mesh.cell_faces, (1, nl)).ravel()
        A_blocks.append(sps.csr_matrix((loc.ravel(), (r, c)), shape=(mesh.num_faces, mesh.num_faces)))
    free = np.concatenate(free)
    n_free = free.size
    A = sps.block_diag(A_blocks, format="csr") if A_blocks else sps.csr_matrix((n_f, n_f))

    E_free = sps.csr_matrix((np.ones(n_free), (free, np.arange(n_free))), shape=(n_f, n_free))
    E = sps.hstack([E_free, _mortar_face_matrix(grid, mort_off, face_off)], format="csr")
    const = flux_nm

    D = _block_diag([_divergence(sd.mesh) for sd in sds], (n_p, n_f))
    J = _jump_matrix(grid, mort_off, cell_off)
    B = D @ E - sps.hstack([sps.csr_matrix((n_p, n_free)), J], format="csr")

    m_lam = np.concatenate(
        [np.zeros(n_free)]
        + [e.mortar_mesh.cell_volumes / np.asarray(data.kappa[e.id], dtype=float) for e in ifs]
    )
    M11 = (E.T @ A @ E + sps.diags(m_lam)).tocsr()
    matrix = sps.bmat([[M11, -B.T], [-B, None]], format="csr")
    rhs = np.concatenate(
        [
            -(E.T @ (A @ const + b_D)),
            -(_source_integrals(grid, data, source_degree) - D @ const),
        ]
    )

    owner_of_face = np.searchsorted(face_off, free, side="right") - 1
    blocks_kind = np.concatenate(
        [np.full(n_free, FACE_FLUX), np.full(n_m, MORTAR), np.full(n_p, CELL_PRESSURE)]
    ).astype(np.int64)
    mort_owner = np.concatenate([np.full(e.num_cells, e.id) for e in ifs]) if ifs else np.zeros(0, int)
    cell_owner = np.concatenate([np.full(sd.mesh.num_cells, sd.id) for sd in sds])
    owner = np.concatenate([owner_of_face, mort_owner, cell_owner]).astype(np.int64)
    local = np.concatenate(
        [
            free - face_off[owner_of_face],
            np.concatenate([np.arange(e.num_cells) for e in ifs]) if ifs else np.zeros(0, int),
            np.concatenate([np.arange(sd.mesh.num_cells) for sd in sds]),
        ]
    ).astype(np.int64)
    flux_op = sps.hstack([E, sps.csr_matrix((n_f, n_p))], format="csr")
    return LinearSystem(
        "rt0", matrix, rhs, blocks_kind, owner, local, flux_op, const, face_off, cell_off, mort_off
    )


# --------------------------------------------------------------------------
# solve and post-processing
# --------------------------------------------------------------------------


def solve(system: LinearSystem, rtol: float = 1e-10) -> DiscreteSolution:
    """Sparse LU solve followed by scattering into per-subdomain fields.

    Raises
    ------
    SolverError
        If the matrix is singular or the relative residual exceeds ``rtol``.
    """
    A = system.matrix.tocsc()
    b = system.rhs
    if A.shape[0] != A.shape[1] or A.shape[0] != b.size:
        raise SolverError("system is not square")
    if b.size == 0:
        x = np.zeros(0)
    else:
        try:
            x = spla.splu(A).solve(b)
        except RuntimeError as err:
            raise SolverError(f"singular matrix: {err}") from err
    if not np.all(np.isfinite(x)):
        raise SolverError("singular matrix: non-finite solution")
    res = np.linalg.norm(A @ x - b)
    scale = np.linalg.norm(b)
    rel = res / scale if scale > 0 else res
    if rel > rtol:
        raise SolverError(f"relative residual {rel:.3e} exceeds {rtol:.1e}")

    p_all = x[system.dof_kind == CELL_PRESSURE]
    lam_all = x[system.dof_kind == MORTAR]
    flux_all = system.flux_op @ x + system.flux_const
    co, mo, fo = system.cell_offsets, system.mortar_offsets, system.face_offsets
    p = [p_all[co[i]:co[i + 1]] for i in range(co.size - 1)]
    lam = [lam_all[mo[k]:mo[k + 1]] for k in range(mo.size - 1)]
    flux = [flux_all[fo[i]:fo[i + 1]] for i in range(fo.size - 1)]
    return DiscreteSolution(system.method, p, flux, lam, None, float(rel))


def solve_matrix(matrix, rhs) -> np.ndarray:
    """Solve a bare sparse system with the same safeguards as :func:`solve`."""
    n = rhs.size
    system = LinearSystem(
        "raw", sps.csr_matrix(matrix), np.asarray(rhs, float),
        np.full(n, CELL_PRESSURE), np.zeros(n, np.int64), np.arange(n),
        sps.csr_matrix((0, n)), np.zeros(0), np.zeros(1, np.int64),
        np.array([0, n]), np.zeros(1, np.int64),
    )
    return solve(system).p[0]


def rt0_extend_fluxes(grid: MDGrid, sol: DiscreteSolution) -> DiscreteSolution:
    """Attach per-cell RT0 coefficients (outward flux per local face)."""
    rt0 = []
    for sd in grid.subdomains:
        mesh = sd.mesh
        if mesh.num_faces == 0:
            rt0.append(np.zeros((mesh.num_cells, 0)))
            continue
        rt0.append(mesh.cell_face_signs * sol.flux[sd.id][mesh.cell_faces])
    return dataclasses.replace(sol, rt0=rt0)


def rt0_evaluate(mesh: SimplexMesh, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate per-cell RT0 fields at ``points`` of shape (nc, nq, n)."""
    if mesh.dim == 0:
        return np.zeros_like(points)
    X = mesh.cell_vertices()
    diff = points[:, :, None, :] - X[:, None, :, :]
    scale = coeffs / (mesh.dim * mesh.cell_volumes)[:, None]
    return np.einsum("ca,cqai->cqi", scale, diff)


def rt0_divergence(mesh: SimplexMesh, coeffs: np.ndarray) -> np.ndarray:
    if mesh.dim == 0:
        return np.zeros(mesh.num_cells)
    return coeffs.sum(axis=1) / mesh.cell_volumes


def check_local_conservation(
    grid: MDGrid, sol: DiscreteSolution, data: ProblemData, source_degree: int = 4
) -> List[np.ndarray]:
    """Per-cell |sum of outward fluxes - integrated jump - integrated source|."""
    out = []
    for sd in grid.subdomains:
        mesh = sd.mesh
        div = np.zeros(mesh.num_cells)
        if mesh.num_faces:
            div = (mesh.cell_face_signs * sol.flux[sd.id][mesh.cell_faces]).sum(axis=1)
        jump = np.zeros(mesh.num_cells)
        for e in grid.interfaces_of_lower(sd.id):
            ov = e.overlaps_lower
            np.add.at(jump, ov.other, ov.measure * sol.lam[e.id][ov.mortar])
        src = integrate_field(data.f[sd.id], grid, sd.id, source_degree)
        out.append(np.abs(div - jump - src))
    return out


def assemble(grid: MDGrid, data: ProblemData, method: str, source_degree: int = 4) -> LinearSystem:
    if method == "tpfa":
        return assemble_tpfa(grid, data, source_degree)
    if method == "rt0":
        return assemble_rt0p0(grid, data, source_degree)
    raise DataError(f"unknown method {method!r}; expected 'tpfa' or 'rt0'")


def solve_problem(grid: MDGrid, data: ProblemData, method: str, source_degree: int = 4) -> DiscreteSolution:
    """Assemble, solve and attach RT0 coefficients."""
    return rt0_extend_fluxes(grid, solve(assemble(grid, data, method, source_degree)))
