"""Diffusive-flux and residual estimators and the computable majorant."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .discretize import DiscreteSolution, rt0_divergence, rt0_evaluate
from .grid import MDGrid
from .problem import ProblemData, evaluate_field, norm_K, norm_K_inv_sqrt, norm_kappa
from .projections import mortar_jump, project_lower_to_mortar, project_trace_to_mortar
from .quadrature import map_points, simplex_rule
from .reconstruct import NodalP1Pressure, cell_gradients, cell_mean_values, face_midpoint_values

POINCARE_CONVEX = 1.0 / np.pi
NORM_CONVENTIONS = ("pointwise", "integrated")


class BoundViolation(AssertionError):
    """The majorant fell below a true error."""


@dataclass(frozen=True)
class ErrorReport:
    """Local estimators, local errors and the global majorant."""

    eta_df_cells: List[np.ndarray]
    eta_df_mortar: List[np.ndarray]
    eta_r_cells: List[np.ndarray]
    eps_df_subdomain: np.ndarray
    eps_df_interface: np.ndarray
    eps_r_subdomain: np.ndarray
    eps_subdomain: np.ndarray
    eps_interface: np.ndarray
    majorant: float
    scaled_majorant: float
    xi: float
    beta: np.ndarray
    gamma: np.ndarray
    c_weights: List[np.ndarray] = field(repr=False, default_factory=list)
    norm_convention: str = "pointwise"

    @property
    def diffusive(self) -> float:
        """sqrt of the sum of all squared diffusive-flux estimators."""
        sq = sum(float(np.sum(e ** 2)) for e in self.eta_df_cells)
        sq += sum(float(np.sum(e ** 2)) for e in self.eta_df_mortar)
        return float(np.sqrt(sq))

    @property
    def residual(self) -> float:
        """sqrt of the sum of all squared residual estimators."""
        return float(np.sqrt(sum(float(np.sum(e ** 2)) for e in self.eta_r_cells)))


def _check_convention(convention: str) -> None:
    if convention not in NORM_CONVENTIONS:
        raise ValueError(f"unknown norm convention {convention!r}; expected one of {NORM_CONVENTIONS}")


# --------------------------------------------------------------------------
# per-cell estimators
# --------------------------------------------------------------------------


def eta_df_cells(vertices: np.ndarray, volumes: np.ndarray, K: np.ndarray, u_at, grad: np.ndarray, degree: int = 2) -> np.ndarray:
    """Vectorized ||K^-1/2 u_h + K^1/2 grad p||_L2(K) over a batch of cells.

    Parameters
    ----------
    vertices : (nc, d + 1, n)
    volumes : (nc,)
    K : (nc, n, n)
    u_at : callable
        Maps points of shape (nc, nq, n) to flux values of the same shape.
    grad : (nc, n)
        Constant gradients of the reconstructed pressure.
    """
    d = vertices.shape[1] - 1
    if d == 0:
        return np.zeros(vertices.shape[0])
    bary, w = simplex_rule(d, degree)
    pts = map_points(vertices, bary)
    v = u_at(pts) + np.einsum("cij,cj->ci", K, grad)[:, None, :]
    K_inv = np.linalg.inv(K)
    integrand = np.einsum("cqi,cij,cqj->cq", v, K_inv, v)
    return np.sqrt(np.clip(integrand @ w, 0.0, None) * volumes)


def eta_df_cell(vertices, K_cell, rt0_field, p1_gradient) -> float:
    """Diffusive-flux estimator of a single cell.

    Parameters
    ----------
    vertices : (d + 1, n) array
    K_cell : scalar or (n, n) tensor
    rt0_field : callable mapping points (m, n) to flux values (m, n)
    p1_gradient : (n,) array
    """
    X = np.asarray(vertices, dtype=float)[None]
    n = X.shape[2]
    K = np.asarray(K_cell, dtype=float)
    K = K * np.eye(n) if K.ndim == 0 else K
    if np.any(np.linalg.eigvalsh(K) <= 0):
        raise ValueError("K must be symmetric positive definite")
    d = X.shape[1] - 1
    from .mesh import make_mesh

    vol = make_mesh(d, X[0], np.arange(d + 1)[None]).cell_volumes
    u_at = lambda pts: np.asarray(rt0_field(pts.reshape(-1, n))).reshape(pts.shape)  # noqa: E731
    return float(eta_df_cells(X, vol, K[None], u_at, np.asarray(p1_gradient, float)[None])[0])


def eta_df_mortar(measure, kappa, lam, p_lower_proj, p_higher_trace_proj):
    """|kappa^-1/2 lam + kappa^1/2 (p_lower - tr p_higher)| * sqrt(|m|); vectorized."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise ValueError("kappa must be positive")
    val = np.asarray(lam) / np.sqrt(kappa) + np.sqrt(kappa) * (
        np.asarray(p_lower_proj) - np.asarray(p_higher_trace_proj)
    )
    return np.abs(val) * np.sqrt(np.asarray(measure, dtype=float))


def eta_r_cells(
    vertices: np.ndarray,
    volumes: np.ndarray,
    diameters: np.ndarray,
    c_weight: np.ndarray,
    f_values,
    divergence: np.ndarray,
    jump: np.ndarray,
    degree: int = 4,
) -> np.ndarray:
    """(C_P h_K / c_K) ||f - div u_h + jump||_L2(K) for a batch of cells.

    ``f_values`` maps quadrature points (nc, nq, n) to source values.
    """
    d = vertices.shape[1] - 1
    if d == 0:
        return np.zeros(vertices.shape[0])
    bary, w = simplex_rule(d, degree)
    pts = map_points(vertices, bary)
    r = f_values(pts) - divergence[:, None] + jump[:, None]
    l2 = np.sqrt((r ** 2) @ w * volumes)
    return POINCARE_CONVEX * diameters / c_weight * l2


def eta_r_cell(vertices, K_cell, f, rt0_divergence_value: float, jump_density: float,
               convention: str = "pointwise", degree: int = 4) -> float:
    """Residual estimator of a single cell.

    ``convention`` selects how ``c_K = ||K^-1/2||`` is measured: the
    pointwise norm, or the L2(K) norm of the constant field, which carries
    an extra factor sqrt(|K|).
    """
    _check_convention(convention)
    from .mesh import make_mesh

    X = np.asarray(vertices, dtype=float)
    d = X.shape[0] - 1
    mesh = make_mesh(d, X, np.arange(d + 1)[None])
    if d == 0 or mesh.cell_diameters[0] == 0:
        return 0.0
    n = X.shape[1]
    K = np.asarray(K_cell, dtype=float)
    lam = np.full(1, float(K)) if K.ndim == 0 else np.linalg.eigvalsh(K)
    c_pt = lam.min() ** -0.5
    c_fro = c_pt if K.ndim == 0 else np.sqrt(np.sum(1.0 / lam))
    c = c_pt if convention == "pointwise" else c_fro * np.sqrt(mesh.cell_volumes[0])
    f_at = (lambda pts: np.asarray(f(pts.reshape(-1, n)), float).reshape(pts.shape[:2])) if callable(f) \
        else (lambda pts: np.full(pts.shape[:2], float(f)))
    return float(
        eta_r_cells(X[None], mesh.cell_volumes, mesh.cell_diameters, np.array([c]), f_at,
                    np.array([rt0_divergence_value], float), np.array([jump_density], float), degree)[0]
    )


# --------------------------------------------------------------------------
# global report
# --------------------------------------------------------------------------


def mortar_pressure_projections(grid: MDGrid, rec: NodalP1Pressure):
    """Per interface, the P0 projections of the lower pressure and of the higher trace."""
    out = []
    for e in grid.interfaces:
        hi, lo = grid.subdomains[e.higher_id].mesh, grid.subdomains[e.lower_id].mesh
        trace = face_midpoint_values(hi, rec.values[e.higher_id])
        low = cell_mean_values(lo, rec.values[e.lower_id])
        out.append((project_lower_to_mortar(e, low), project_trace_to_mortar(e, trace)))
    return out


def assemble_report(
    grid: MDGrid,
    data: ProblemData,
    sol: DiscreteSolution,
    rec: NodalP1Pressure,
    norm_convention: str = "pointwise",
    df_degree: int = 2,
    r_degree: int = 4,
) -> ErrorReport:
    """Evaluate every local estimator and aggregate them into the majorant.

    ``norm_convention`` selects how norms of the constant permeability
    fields entering ``c_K``, the local-error weights and ``xi`` are taken;
    see :func:`mdaposteriori.problem.norm_K`.
    """
    _check_convention(norm_convention)
    if sol.rt0 is None:
        raise ValueError("RT0 coefficients missing; call rt0_extend_fluxes first")
    n = grid.ambient_dim
    df, rr, cw = [], [], []
    for sd in grid.subdomains:
        mesh = sd.mesh
        K = data.K_tensor(sd.id, n)
        coeffs = sol.rt0[sd.id]
        grad = cell_gradients(mesh, rec.values[sd.id])
        X = mesh.cell_vertices()
        u_at = lambda pts, m=mesh, c=coeffs: rt0_evaluate(m, c, pts)  # noqa: E731
        df.append(eta_df_cells(X, mesh.cell_volumes, K, u_at, grad, df_degree))
        c = norm_K_inv_sqrt(data, grid, sd.id, norm_convention)
        cw.append(c)
        jump = mortar_jump(grid, sol.lam, sd.id)
        f_at = lambda pts, i=sd.id: evaluate_field(data.f[i], grid, i, pts)  # noqa: E731
        rr.append(
            eta_r_cells(X, mesh.cell_volumes, mesh.cell_diameters, c, f_at,
                        rt0_divergence(mesh, coeffs), jump, r_degree)
        )

    dfm = []
    for e, (p_low, p_tr) in zip(grid.interfaces, mortar_pressure_projections(grid, rec)):
        dfm.append(eta_df_mortar(e.mortar_mesh.cell_volumes, data.kappa[e.id], sol.lam[e.id], p_low, p_tr))

    n_sd, n_if = len(grid.subdomains), len(grid.interfaces)
    eps_df_sd = np.array([
        np.sqrt(np.sum(df[i] ** 2 / norm_K(data, grid, i, norm_convention))) for i in range(n_sd)
    ])
    eps_df_if = np.array([
        np.sqrt(np.sum(dfm[k] ** 2 / norm_kappa(data, grid, k, norm_convention))) for k in range(n_if)
    ])
    eps_r_sd = np.array([np.sqrt(np.sum(rr[i] ** 2)) for i in range(n_sd)])
    eps_sd = np.sqrt(eps_df_sd ** 2 + eps_r_sd ** 2)

    sq_df = sum(float(np.sum(x ** 2)) for x in df) + sum(float(np.sum(x ** 2)) for x in dfm)
    sq_r = sum(float(np.sum(x ** 2)) for x in rr)
    M_h = float(np.sqrt(sq_df) + np.sqrt(sq_r))

    beta, gamma = xi_components(grid, data, norm_convention)
    xi = float(max(beta.max(initial=0.0), gamma.max(initial=0.0)))
    return ErrorReport(
        eta_df_cells=df,
        eta_df_mortar=dfm,
        eta_r_cells=rr,
        eps_df_subdomain=eps_df_sd,
        eps_df_interface=eps_df_if,
        eps_r_subdomain=eps_r_sd,
        eps_subdomain=eps_sd,
        eps_interface=eps_df_if.copy(),
        majorant=M_h,
        scaled_majorant=M_h / xi,
        xi=xi,
        beta=beta,
        gamma=gamma,
        c_weights=cw,
        norm_convention=norm_convention,
    )


def xi_components(grid: MDGrid, data: ProblemData, convention: str = "pointwise"):
    """``beta_i = (max_K ||K_i||)^1/2`` and ``gamma_i = (max ||kappa||)^1/2``.

    ``gamma_i`` runs over the interfaces whose lower side is ``i`` and is 0
    for subdomains without such interfaces.
    """
    beta = np.array([
        np.sqrt(norm_K(data, grid, sd.id, convention).max(initial=0.0)) for sd in grid.subdomains
    ])
    gamma = np.zeros(len(grid.subdomains))
    for e in grid.interfaces:
        g = np.sqrt(norm_kappa(data, grid, e.id, convention).max(initial=0.0))
        gamma[e.lower_id] = max(gamma[e.lower_id], g)
    return beta, gamma


def scaled_majorant(report: ErrorReport, data: ProblemData, grid: MDGrid, convention: Optional[str] = None):
    """Recompute ``xi`` from the data and return ``(M_h / xi, xi)``."""
    beta, gamma = xi_components(grid, data, convention or report.norm_convention)
    xi = float(max(beta.max(initial=0.0), gamma.max(initial=0.0)))
    return report.majorant / xi, xi


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    margin_p: float
    margin_u: float


def verify_guaranteed_bound(report, true_errors, rel_slack: float = 1e-6, raise_on_failure: bool = False) -> BoundCheck:
    """Check ``M_h >= |||p - p_h|||`` and ``M_h >= |||u - u_h|||``.

    ``report`` is an :class:`ErrorReport` or a bare majorant value and
    ``true_errors`` the pair ``(err_p, err_u)``. Margins are ``M_h / error``.
    """
    M = float(report.majorant if isinstance(report, ErrorReport) else report)
    err_p, err_u = (float(x) for x in true_errors)
    holds = M >= err_p * (1 - rel_slack) and M >= err_u * (1 - rel_slack)
    margin = lambda e: np.inf if e == 0 else M / e  # noqa: E731
    check = BoundCheck(bool(holds), margin(err_p), margin(err_u))
    if raise_on_failure and not holds:
        raise BoundViolation(f"majorant {M:.6e} below true error ({err_p:.6e}, {err_u:.6e})")
    return check
