"""Closed-form validation solution, true errors and effectivity indices.

In the validation problem the matrix pressure is the distance to the
fracture segment ``x1 = 1/2, 1/4 <= x2 <= 3/4`` (or the square
``1/4 <= x2, x3 <= 3/4`` in three dimensions), the fracture pressure is
-1 and both mortar fluxes equal 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .discretize import DiscreteSolution
from .grid import MDGrid
from .problem import ProblemData, make_problem
from .quadrature import map_points, simplex_rule
from .reconstruct import NodalP1Pressure, cell_gradients
from .estimate import mortar_pressure_projections

LOW, HIGH = 0.25, 0.75
P_FRACTURE = -1.0
F_FRACTURE = -2.0
LAMBDA_EXACT = 1.0
JUMP_EXACT = -1.0


def _offsets(x: np.ndarray) -> np.ndarray:
    """Signed offsets (alpha, beta, gamma, ...) of points from the fracture.

    The first coordinate is measured from 1/2; every further coordinate is
    zero inside [1/4, 3/4] and the distance to the nearer end otherwise.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.empty_like(x)
    w[:, 0] = x[:, 0] - 0.5
    t = x[:, 1:]
    w[:, 1:] = np.where(t < LOW, t - LOW, np.where(t > HIGH, t - HIGH, 0.0))
    return w


def _pressure(x):
    return np.linalg.norm(_offsets(x), axis=1)


def _velocity(x):
    w = _offsets(x)
    r = np.linalg.norm(w, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -w / r[:, None]


def _source(x):
    w = _offsets(x)
    r = np.linalg.norm(w, axis=1)
    # -Laplacian of |w| with k active components is -(k - 1) / |w|
    k = 1 + np.count_nonzero(w[:, 1:], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(k > 1, -(k - 1) / r, 0.0)


def _check_dim(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"expected {n}-d points, got shape {x.shape}")
    return x


def _scalar_or_array(values, x):
    return float(values[0]) if np.asarray(x).ndim == 1 else values


def exact_p2(x):
    """Matrix pressure in two dimensions; ``x`` is (2,) or (m, 2)."""
    x = _check_dim(x, 2)
    return _scalar_or_array(_pressure(x), x)


def exact_u2(x):
    x = _check_dim(x, 2)
    u = _velocity(x)
    return u[0] if x.ndim == 1 else u


def exact_f2(x):
    x = _check_dim(x, 2)
    return _scalar_or_array(_source(x), x)


def exact_p3(x):
    x = _check_dim(x, 3)
    return _scalar_or_array(_pressure(x), x)


def exact_u3(x):
    x = _check_dim(x, 3)
    u = _velocity(x)
    return u[0] if x.ndim == 1 else u


def exact_f3(x):
    x = _check_dim(x, 3)
    return _scalar_or_array(_source(x), x)


def region_2d(x) -> np.ndarray:
    """0 = bottom, 1 = middle band, 2 = top."""
    t = np.atleast_2d(np.asarray(x, float))[:, 1]
    return np.where(t < LOW, 0, np.where(t > HIGH, 2, 1))


def region_3d(x) -> np.ndarray:
    """Nine regions numbered ``3 * region(x2) + region(x3)``."""
    x = np.atleast_2d(np.asarray(x, float))
    r = lambda t: np.where(t < LOW, 0, np.where(t > HIGH, 2, 1))  # noqa: E731
    return 3 * r(x[:, 1]) + r(x[:, 2])


@dataclass(frozen=True)
class ExactSolution:
    """Exact fields per subdomain and exact mortar quantities per interface.

    ``pressure[i]``, ``velocity[i]`` and ``source[i]`` take points of shape
    (m, n). ``mortar_flux[k]`` and ``pressure_jump[k]`` are constants of
    interface ``k``.
    """

    pressure: Sequence[Callable]
    velocity: Sequence[Callable]
    source: Sequence[Callable]
    mortar_flux: Sequence[float] = ()
    pressure_jump: Sequence[float] = ()
    case: str = "d2"
    singular_points: Sequence[Sequence[float]] = ()


def _const(value):
    return lambda x: np.full(np.atleast_2d(x).shape[0], value)


def _zero_vec(x):
    return np.zeros_like(np.atleast_2d(np.asarray(x, float)))


def validation_solution(grid: Optional[MDGrid] = None) -> ExactSolution:
    """Exact solution for the grid built by ``build_validation_grid``."""
    n_if = 2 if grid is None else len(grid.interfaces)
    return ExactSolution(
        pressure=[_pressure, _const(P_FRACTURE)],
        velocity=[_velocity, _zero_vec],
        source=[_source, _const(F_FRACTURE)],
        mortar_flux=[LAMBDA_EXACT] * n_if,
        pressure_jump=[JUMP_EXACT] * n_if,
        case="d2",
        # the gradient is discontinuous at the fracture tips
        singular_points=[(0.5, LOW), (0.5, HIGH)],
    )


SOURCE_RULES = ("exact", "centroid")


def validation_problem(grid: MDGrid, source_rule: str = "exact") -> ProblemData:
    """Unit permeabilities, exact sources and exact Dirichlet pressures.

    Parameters
    ----------
    source_rule : {"exact", "centroid"}
        ``exact`` passes the pointwise matrix source, so integrals and the
        residual estimator see its full variation. ``centroid`` replaces it
        by its value at each cell centroid (piecewise-constant data).
    """
    if source_rule == "exact":
        f_matrix = _source
    elif source_rule == "centroid":
        f_matrix = _source(grid.subdomains[0].mesh.cell_centroids)
    else:
        raise ValueError(f"unknown source rule {source_rule!r}; expected one of {SOURCE_RULES}")
    return make_problem(
        grid,
        K=1.0,
        kappa=1.0,
        f=[f_matrix, F_FRACTURE],
        g_D=[_pressure, None],
        g_N=None,
    )


SINGULAR_DEPTH = 14
SINGULAR_RATIO = 0.25


def _children(simplices: np.ndarray) -> np.ndarray:
    """Uniform split of segments into 2 or triangles into 4; (k, d+1, n) -> (k * 2^d, d+1, n)."""
    d = simplices.shape[1] - 1
    if d == 1:
        a, b = simplices[:, 0], simplices[:, 1]
        m = (a + b) / 2
        kids = [(a, m), (m, b)]
    elif d == 2:
        a, b, c = simplices[:, 0], simplices[:, 1], simplices[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        kids = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    else:
        raise NotImplementedError("graded quadrature is implemented for segments and triangles")
    return np.stack([np.stack(k, axis=1) for k in kids], axis=1).reshape(-1, d + 1, simplices.shape[2])


def _too_coarse(simplices: np.ndarray, points: np.ndarray, ratio: float) -> np.ndarray:
    d = simplices.shape[1]
    diam = np.zeros(simplices.shape[0])
    for i in range(d):
        for j in range(i + 1, d):
            diam = np.maximum(diam, np.linalg.norm(simplices[:, i] - simplices[:, j], axis=1))
    dist = np.linalg.norm(simplices.mean(axis=1)[:, None, :] - points[None], axis=2).min(axis=1)
    return diam > ratio * np.maximum(dist - diam, 0.0)


def graded_subsimplices(vertices: np.ndarray, points, ratio: float = SINGULAR_RATIO,
                        depth: int = SINGULAR_DEPTH, owners=None):
    """Sub-simplices refined until each is small against its distance to ``points``.

    ``vertices`` is one simplex (d+1, n) or a batch (k, d+1, n). For a batch
    the owner index of every sub-simplex is returned as well.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    todo = np.asarray(vertices, dtype=float)
    single = todo.ndim == 2
    if single:
        todo = todo[None]
    own = np.arange(todo.shape[0]) if owners is None else np.asarray(owners)
    done, done_own = [], []
    for _ in range(depth):
        coarse = _too_coarse(todo, points, ratio)
        done.append(todo[~coarse])
        done_own.append(own[~coarse])
        if not coarse.any():
            todo, own = todo[:0], own[:0]
            break
        nkids = 2 ** (todo.shape[1] - 1)
        todo = _children(todo[coarse])
        own = np.repeat(own[coarse], nkids)
    subs = np.concatenate(done + [todo])
    sub_own = np.concatenate(done_own + [own])
    return subs if single else (subs, sub_own)


def _cell_integral(mesh, degree: int, integrand, singular_points) -> np.ndarray:
    """Per-cell integrals of ``integrand(cells, points) -> (len(cells), nq)``.

    Cells close to a singular point, compared with their size, use a
    composite rule graded towards it; all other cells use one simplex rule.
    """
    bary, w = simplex_rule(mesh.dim, degree)
    X = mesh.cell_vertices()
    special = np.zeros(mesh.num_cells, dtype=bool)
    sing = np.atleast_2d(np.asarray(singular_points, dtype=float)) if len(singular_points) else None
    if sing is not None:
        dist = np.linalg.norm(mesh.cell_centroids[:, None, :] - sing[None], axis=2).min(axis=1)
        special = mesh.cell_diameters > SINGULAR_RATIO * np.maximum(dist - mesh.cell_diameters, 0.0)
    regular = np.flatnonzero(~special)
    out = np.zeros(mesh.num_cells)
    if regular.size:
        pts = map_points(X[regular], bary)
        out[regular] = (integrand(regular, pts) @ w) * mesh.cell_volumes[regular]
    cells = np.flatnonzero(special)
    if cells.size:
        subs, own = graded_subsimplices(X[cells], sing, owners=cells)
        E = subs[:, 1:] - subs[:, :1]
        vols = np.sqrt(np.abs(np.linalg.det(np.einsum("sin,sjn->sij", E, E)))) / math.factorial(mesh.dim)
        vals = integrand(own, map_points(subs, bary)) @ w
        out += np.bincount(own, vals * vols, minlength=mesh.num_cells)
    return out


def _check_case(grid: MDGrid, exact: ExactSolution):
    if exact.case != "d2" or grid.ambient_dim != 2:
        raise ValueError("true errors are only available for the two-dimensional case")
    if len(exact.pressure) != len(grid.subdomains):
        raise ValueError("exact solution does not match the grid")


def _rt0_at(mesh, coeffs: np.ndarray, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
    X = mesh.cell_vertices()[cells]
    diff = pts[:, :, None, :] - X[:, None, :, :]
    scale = coeffs[cells] / (mesh.dim * mesh.cell_volumes[cells])[:, None]
    return np.einsum("ca,cqai->cqi", scale, diff)


def true_pressure_error(grid: MDGrid, rec: NodalP1Pressure, exact: ExactSolution, data: ProblemData,
                        degree: int = 6, per_subdomain: bool = False):
    """Energy norm of ``p - p_h`` including the interface jump terms."""
    _check_case(grid, exact)
    sq_sd = np.zeros(len(grid.subdomains))
    for sd in grid.subdomains:
        mesh = sd.mesh
        if mesh.dim == 0:
            continue
        grad_h = cell_gradients(mesh, rec.values[sd.id])
        K = data.K_tensor(sd.id, grid.ambient_dim)
        K_inv = np.linalg.inv(K)

        def integrand(cells, pts, sd=sd, grad_h=grad_h, K=K, K_inv=K_inv):
            u_ex = np.asarray(exact.velocity[sd.id](pts.reshape(-1, grid.ambient_dim))).reshape(pts.shape)
            diff = -np.einsum("cij,cqj->cqi", K_inv[cells], u_ex) - grad_h[cells, None, :]
            return np.einsum("cqi,cij,cqj->cq", diff, K[cells], diff)

        sq_sd[sd.id] = float(np.sum(_cell_integral(mesh, degree, integrand, exact.singular_points)))
    sq_if = np.zeros(len(grid.interfaces))
    for e, (p_low, p_tr) in zip(grid.interfaces, mortar_pressure_projections(grid, rec)):
        kap = np.asarray(data.kappa[e.id], dtype=float)
        r_h = p_low - p_tr
        sq_if[e.id] = float(np.sum(kap * (exact.pressure_jump[e.id] - r_h) ** 2 * e.mortar_mesh.cell_volumes))
    total = float(np.sqrt(sq_sd.sum() + sq_if.sum()))
    if per_subdomain:
        return total, np.sqrt(sq_sd), np.sqrt(sq_if)
    return total


def true_flux_error(grid: MDGrid, sol: DiscreteSolution, exact: ExactSolution, data: ProblemData,
                    degree: int = 6, per_subdomain: bool = False):
    """Weighted L2 norm of ``u - u_h`` plus the mortar flux terms."""
    _check_case(grid, exact)
    if sol.rt0 is None:
        raise ValueError("RT0 coefficients missing; call rt0_extend_fluxes first")
    sq_sd = np.zeros(len(grid.subdomains))
    for sd in grid.subdomains:
        mesh = sd.mesh
        if mesh.dim == 0:
            continue
        K_inv = np.linalg.inv(data.K_tensor(sd.id, grid.ambient_dim))
        coeffs = sol.rt0[sd.id]

        def integrand(cells, pts, sd=sd, mesh=mesh, coeffs=coeffs, K_inv=K_inv):
            u_ex = np.asarray(exact.velocity[sd.id](pts.reshape(-1, grid.ambient_dim))).reshape(pts.shape)
            diff = u_ex - _rt0_at(mesh, coeffs, cells, pts)
            return np.einsum("cqi,cij,cqj->cq", diff, K_inv[cells], diff)

        sq_sd[sd.id] = float(np.sum(_cell_integral(mesh, degree, integrand, exact.singular_points)))
    sq_if = np.zeros(len(grid.interfaces))
    for e in grid.interfaces:
        kap = np.asarray(data.kappa[e.id], dtype=float)
        sq_if[e.id] = float(np.sum((exact.mortar_flux[e.id] - sol.lam[e.id]) ** 2 / kap * e.mortar_mesh.cell_volumes))
    total = float(np.sqrt(sq_sd.sum() + sq_if.sum()))
    if per_subdomain:
        return total, np.sqrt(sq_sd), np.sqrt(sq_if)
    return total


@dataclass(frozen=True)
class Effectivity:
    I_p: float
    I_u: float
    I_pu: float
    flagged: bool = False

    def __iter__(self):
        return iter((self.I_p, self.I_u, self.I_pu))


def effectivity(M_h: float, err_p: float, err_u: float, combined: float = 0.0) -> Effectivity:
    """Effectivity indices ``M/e_p``, ``M/e_u`` and ``3M / (e_p + e_u + R)``.

    ``combined`` is the residual term ``R`` of the combined error. A
    vanishing denominator yields an infinite index and sets ``flagged``.
    """
    def ratio(num, den):
        if den == 0:
            return np.inf if num > 0 else np.nan
        return num / den

    vals = (ratio(M_h, err_p), ratio(M_h, err_u), ratio(3.0 * M_h, err_p + err_u + combined))
    flagged = err_p == 0 or err_u == 0
    return Effectivity(*(float(v) for v in vals), flagged=flagged)
