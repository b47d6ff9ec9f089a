import dataclasses

import numpy as np
import pytest

from mdaposteriori.discretize import solve_problem
from mdaposteriori.estimate import (
    BoundViolation,
    assemble_report,
    eta_df_cell,
    eta_df_mortar,
    eta_r_cell,
    scaled_majorant,
    verify_guaranteed_bound,
    xi_components,
)
from mdaposteriori.exact import validation_problem
from mdaposteriori.mesh import make_mesh
from mdaposteriori.problem import make_problem
from mdaposteriori.reconstruct import reconstruct_pressure

from conftest import equilateral_mesh, single_domain_grid, square_mesh, study_run

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def pipeline(grid, data, method="rt0", **kw):
    sol = solve_problem(grid, data, method)
    rec = reconstruct_pressure(grid, sol, data)
    return assemble_report(grid, data, sol, rec, **kw)


def test_df_vanishes_for_consistent_pair():
    K = np.array([[2.0, 0.5], [0.5, 1.0]])
    grad = np.array([0.3, -1.2])
    u = lambda x: np.tile(-K @ grad, (x.shape[0], 1))  # noqa: E731
    assert eta_df_cell(REF, K, u, grad) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("K,expected", [(1.0, np.sqrt(0.5)), (4.0, 2 * np.sqrt(0.5))])
def test_df_reference_values(K, expected):
    zero = lambda x: np.zeros_like(x)  # noqa: E731
    assert eta_df_cell(REF, K, zero, [1.0, 0.0]) == pytest.approx(expected)


def test_df_rejects_indefinite_tensor():
    with pytest.raises(ValueError):
        eta_df_cell(REF, -np.eye(2), lambda x: x, [0.0, 0.0])


@pytest.mark.parametrize(
    "measure,kappa,lam,p_low,p_tr,expected",
    [
        (1.0, 1.0, 1.0, -1.0, 0.0, 0.0),
        (0.25, 1.0, 0.0, 1.0, 0.0, 0.5),
        (1.0, 100.0, 0.0, 0.1, 0.0, 1.0),
    ],
)
def test_mortar_estimator(measure, kappa, lam, p_low, p_tr, expected):
    assert eta_df_mortar(measure, kappa, lam, p_low, p_tr) == pytest.approx(expected, abs=1e-14)


def test_residual_vanishes_for_balanced_fracture_cell():
    seg = np.array([[0.5, 0.25], [0.5, 0.3]])
    assert eta_r_cell(seg, 1.0, -2.0, 0.0, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_residual_on_point_cell_is_zero():
    assert eta_r_cell(np.array([[0.5, 0.5]]), 1.0, 3.0, 0.0, 1.0) == 0.0


def test_residual_reference_triangle():
    # integrated weight c_K = ||K^-1/2||_L2(K) = sqrt(|K|)
    assert eta_r_cell(REF, 1.0, 1.0, 0.0, 0.0, convention="integrated") == pytest.approx(np.sqrt(2) / np.pi)
    # pointwise weight c_K = 1
    assert eta_r_cell(REF, 1.0, 1.0, 0.0, 0.0) == pytest.approx(np.sqrt(2) / np.pi * np.sqrt(0.5))


def test_residual_uses_smallest_eigenvalue():
    K = np.diag([4.0, 0.25])
    assert eta_r_cell(REF, K, 1.0, 0.0, 0.0) == pytest.approx(np.sqrt(0.25) * eta_r_cell(REF, 1.0, 1.0, 0.0, 0.0))


def test_unknown_convention():
    with pytest.raises(ValueError):
        eta_r_cell(REF, 1.0, 1.0, 0.0, 0.0, convention="sup")


@pytest.mark.parametrize("method,mesh", [("rt0", square_mesh(4, 0.2)), ("tpfa", equilateral_mesh(4))])
def test_patch_test_has_zero_majorant(method, mesh):
    g = single_domain_grid(mesh)
    rep = pipeline(g, make_problem(g, K=3.0, g_D=lambda x: 2.0 - x[:, 0] + 0.5 * x[:, 1]), method)
    assert rep.majorant <= 1e-10
    assert all(np.all(e >= 0) for e in rep.eta_df_cells + rep.eta_r_cells)


def test_report_aggregates(coarse_grid):
    rep = pipeline(coarse_grid, validation_problem(coarse_grid))
    assert rep.diffusive == pytest.approx(np.sqrt(np.sum(rep.eps_df_subdomain ** 2) + np.sum(rep.eps_df_interface ** 2)))
    assert rep.residual == pytest.approx(np.sqrt(np.sum(rep.eps_r_subdomain ** 2)))
    assert rep.majorant == pytest.approx(rep.diffusive + rep.residual)
    assert rep.eps_r_subdomain[1] < 1e-12


def test_unit_permeability_scaling(coarse_grid):
    rep = pipeline(coarse_grid, validation_problem(coarse_grid))
    assert rep.xi == 1.0
    assert rep.scaled_majorant * rep.xi == rep.majorant
    assert scaled_majorant(rep, validation_problem(coarse_grid), coarse_grid) == (rep.majorant, 1.0)


@pytest.mark.parametrize("convention", ["pointwise", "integrated"])
def test_doubling_permeabilities(coarse_grid, convention):
    base = validation_problem(coarse_grid)
    doubled = dataclasses.replace(base, K=[2 * k for k in base.K], kappa=[2 * k for k in base.kappa])
    b0, g0 = xi_components(coarse_grid, base, convention)
    b1, g1 = xi_components(coarse_grid, doubled, convention)
    assert np.allclose(b1, np.sqrt(2) * b0)
    assert np.allclose(g1, np.sqrt(2) * g0)
    rep = pipeline(coarse_grid, doubled, norm_convention=convention)
    M_eps, xi = scaled_majorant(rep, doubled, coarse_grid)
    assert xi == pytest.approx(np.sqrt(2) * max(b0.max(), g0.max()))
    assert M_eps * xi == pytest.approx(rep.majorant, rel=1e-15)


def test_beta_of_single_cell():
    m = make_mesh(2, [[0, 0], [2, 0], [0, 1]], [[0, 1, 2]])
    g = single_domain_grid(m)
    data = make_problem(g, K=4.0, g_D=0.0)
    for convention in ("pointwise", "integrated"):
        beta, gamma = xi_components(g, data, convention)
        assert beta == pytest.approx([2.0])
        assert gamma == pytest.approx([0.0])


def test_bound_check_margins():
    chk = verify_guaranteed_bound(2.0, (1.0, 0.5))
    assert chk.holds and chk.margin_p == 2.0 and chk.margin_u == 4.0
    assert verify_guaranteed_bound(0.0, (0.0, 0.0)).holds
    assert verify_guaranteed_bound(1.0, (1.0 + 1e-7, 0.0)).holds
    assert not verify_guaranteed_bound(1.0, (1.1, 0.0)).holds
    with pytest.raises(BoundViolation):
        verify_guaranteed_bound(1.0, (1.1, 0.0), raise_on_failure=True)


def test_zero_error_patch_is_a_vacuous_pass():
    g = single_domain_grid(square_mesh(3))
    rep = pipeline(g, make_problem(g, g_D=lambda x: x[:, 1]))
    assert verify_guaranteed_bound(rep, (0.0, 0.0)).holds


@pytest.mark.parametrize("method", ["tpfa", "rt0"])
def test_halved_majorant_is_flagged(method):
    run = study_run(method, 1)
    chk = verify_guaranteed_bound(run.report.majorant / 2, (run.err_p, run.err_u))
    assert not chk.holds


def test_zeta1_majorant_magnitude():
    assert study_run("rt0", 1).report.majorant == pytest.approx(7.36e-2, rel=0.2)


@pytest.mark.slow
def test_zeta5_majorant_magnitude_and_ratio():
    m4, m5 = study_run("rt0", 4).report.majorant, study_run("rt0", 5).report.majorant
    assert m4 / m5 == pytest.approx(1.86, rel=0.1)
    assert m5 == pytest.approx(6.30e-3, rel=0.2)
