import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdaposteriori.projections import (
    extend_mortar_to_lower,
    lower_to_mortar_map,
    mortar_jump,
    project_lower_to_mortar,
    project_trace_to_mortar,
    trace_to_mortar_map,
)

from conftest import strip_grid


def test_constant_face_density_is_preserved(zeta1_grid):
    for e in zeta1_grid.interfaces:
        assert np.allclose(project_trace_to_mortar(e, np.ones(e.higher_faces.size)), 1.0)


def test_weighted_overlap_sum():
    g = strip_grid([0, 0.5, 1.0], [0, 1.0], [0, 1.0])
    e = g.interfaces[0]
    mesh = g.subdomains[0].mesh
    vals = np.where(mesh.face_centers[e.higher_faces, 1] < 0.5, 2.0, 0.0)
    assert project_trace_to_mortar(e, vals) == pytest.approx([1.0])


def test_full_face_array_is_accepted():
    g = strip_grid([0, 0.5, 1.0], [0, 1.0], [0, 1.0])
    e = g.interfaces[0]
    full = np.zeros(g.subdomains[0].mesh.num_faces)
    full[e.higher_faces] = 4.0
    assert project_trace_to_mortar(e, full) == pytest.approx([4.0])


def test_exact_normal_trace_gives_unit_mortar_flux(zeta1_grid):
    from mdaposteriori.exact import exact_u2

    mesh = zeta1_grid.subdomains[0].mesh
    for e in zeta1_grid.interfaces:
        # flux density leaving the matrix towards the fracture
        owner_x = mesh.cell_centroids[mesh.face_cells[e.higher_faces, 0], 0]
        pts = mesh.face_centers[e.higher_faces] + np.column_stack([np.sign(owner_x - 0.5) * 1e-9, 0 * owner_x])
        un = np.einsum("fi,fi->f", exact_u2(pts), mesh.face_normals[e.higher_faces])
        assert np.allclose(project_trace_to_mortar(e, un), 1.0)


def test_constant_fracture_pressure(zeta1_grid):
    n = zeta1_grid.subdomains[1].mesh.num_cells
    for e in zeta1_grid.interfaces:
        assert np.allclose(project_lower_to_mortar(e, -np.ones(n)), -1.0)


def test_arithmetic_mean_of_two_lower_cells():
    g = strip_grid([0, 1.0], [0, 1.0], [0, 0.5, 1.0])
    assert project_lower_to_mortar(g.interfaces[0], [0.0, 2.0]) == pytest.approx([1.0])


def test_matching_lower_projection_is_identity():
    ys = np.linspace(0, 1, 6)
    g = strip_grid(ys, ys, ys)
    v = np.arange(5.0)
    assert np.allclose(project_lower_to_mortar(g.interfaces[0], v), v)


@pytest.mark.parametrize("value", [1.0, 3.0, -1.0])
def test_extension_of_constant_density(value):
    g = strip_grid([0, 1.0], [0, 1.0], [0, 0.25, 1.0])
    assert np.allclose(extend_mortar_to_lower(g.interfaces[0], [value]), value)


def test_extension_length_mismatch():
    g = strip_grid([0, 1.0], [0, 1.0], [0, 0.25, 1.0])
    with pytest.raises(ValueError, match="length mismatch"):
        extend_mortar_to_lower(g.interfaces[0], [1.0, 2.0])


def test_jump_on_validation_fracture(zeta1_grid):
    lam = [np.ones(e.num_cells) for e in zeta1_grid.interfaces]
    assert np.allclose(mortar_jump(zeta1_grid, lam, 1), 2.0)
    assert np.allclose(mortar_jump(zeta1_grid, lam, 0), 0.0)
    assert mortar_jump(zeta1_grid, lam, 0).size == zeta1_grid.subdomains[0].mesh.num_cells


def test_single_sided_jump():
    g = strip_grid([0, 1.0], [0, 0.5, 1.0], [0, 1.0])
    assert mortar_jump(g, [np.full(2, 5.0)], 1) == pytest.approx([5.0])


def test_unknown_subdomain():
    g = strip_grid([0, 1.0], [0, 1.0], [0, 1.0])
    with pytest.raises(ValueError):
        mortar_jump(g, [np.ones(1)], 7)


def test_average_rows_sum_to_one(zeta1_grid):
    n_low = zeta1_grid.subdomains[1].mesh.num_cells
    n_faces = zeta1_grid.subdomains[0].mesh.num_faces
    for e in zeta1_grid.interfaces:
        for pm in (lower_to_mortar_map(e, n_low), trace_to_mortar_map(e, n_faces)):
            assert np.allclose(np.asarray(pm.weights.sum(axis=1)).ravel(), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    n_mortar=st.integers(1, 9),
    n_lower=st.integers(1, 9),
    seed=st.integers(0, 2**16),
)
def test_conservation_and_linearity(n_mortar, n_lower, seed):
    rng = np.random.default_rng(seed)
    cut = lambda n: np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, n - 1)), [1.0]])  # noqa: E731
    g = strip_grid([0, 0.5, 1.0], cut(n_mortar), cut(n_lower))
    e = g.interfaces[0]
    low_vol = g.subdomains[1].mesh.cell_volumes
    a, b = rng.normal(size=(2, n_mortar))
    ext = extend_mortar_to_lower(e, a)
    assert ext @ low_vol == pytest.approx(a @ e.mortar_mesh.cell_volumes, rel=1e-12, abs=1e-14)
    s, t = rng.normal(size=2)
    combo = extend_mortar_to_lower(e, s * a + t * b)
    assert np.allclose(combo, s * ext + t * extend_mortar_to_lower(e, b), atol=1e-12)
