import numpy as np
import pytest

from mdaposteriori.grid import BoundaryTag
from mdaposteriori.problem import DataError, integrate_field, make_problem, norm_K, norm_K_inv_sqrt, norm_kappa

from conftest import single_domain_grid, square_mesh


def grid():
    return single_domain_grid(square_mesh(2))


def test_scalar_broadcast():
    g = grid()
    data = make_problem(g, K=2.5, g_D=0.0)
    assert np.all(data.K[0] == 2.5)
    assert data.K_tensor(0, 2).shape == (8, 2, 2)
    assert data.is_scalar(0)


@pytest.mark.parametrize(
    "K",
    [-1.0, np.tile(np.array([[1.0, 2.0], [0.0, 1.0]]), (8, 1, 1)), np.tile(np.diag([1.0, -1.0]), (8, 1, 1))],
)
def test_invalid_permeability(K):
    with pytest.raises(DataError):
        make_problem(grid(), K=K, g_D=0.0)


def test_dirichlet_data_required():
    with pytest.raises(DataError, match="g_D"):
        make_problem(grid())


def test_neumann_data_required():
    g = single_domain_grid(square_mesh(2), BoundaryTag.NEUMANN)
    with pytest.raises(DataError, match="g_N"):
        make_problem(g)


def test_per_subdomain_list_length():
    with pytest.raises(DataError):
        make_problem(grid(), K=[1.0, 2.0], g_D=0.0)


def test_integrate_field():
    g = grid()
    assert integrate_field(3.0, g, 0).sum() == pytest.approx(3.0)
    assert integrate_field(lambda x: x[:, 0] ** 2, g, 0).sum() == pytest.approx(1 / 3)


def test_norm_conventions(coarse_grid):
    K = np.tile(np.diag([4.0, 1.0]), (coarse_grid.subdomains[0].mesh.num_cells, 1, 1))
    data = make_problem(coarse_grid, K=[K, 1.0], kappa=2.0, g_D=[0.0, None])
    vol = coarse_grid.subdomains[0].mesh.cell_volumes
    assert np.allclose(norm_K(data, coarse_grid, 0), 4.0)
    assert np.allclose(norm_K(data, coarse_grid, 0, "integrated"), np.sqrt(17.0) * np.sqrt(vol))
    assert np.allclose(norm_K_inv_sqrt(data, coarse_grid, 0), 1.0)
    assert np.allclose(norm_K_inv_sqrt(data, coarse_grid, 0, "integrated"), np.sqrt(1.25) * np.sqrt(vol))
    assert np.allclose(norm_kappa(data, coarse_grid, 0), 2.0)
    with pytest.raises(ValueError):
        norm_K(data, coarse_grid, 0, "max")
