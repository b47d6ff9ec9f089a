import json

import numpy as np
import pytest

from mdaposteriori.grid import BoundaryTag, GridValidationError
from mdaposteriori.io import (
    FormatError,
    load_mdgrid,
    load_problem_data,
    mdgrid_to_dict,
    parse_mdgrid,
    parse_problem_data,
    save_mdgrid,
)
from mdaposteriori.problem import DataError

TRIANGLE = {"id": 0, "dim": 2, "nodes": [0, 0, 1, 0, 0, 1], "cells": [0, 1, 2]}


def test_minimal_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"ambient_dim": 2, "subdomains": [TRIANGLE]}))
    g = load_mdgrid(path)
    assert len(g.subdomains) == 1 and len(g.interfaces) == 0


def test_disconnected_subdomains_load():
    seg = {"id": 1, "dim": 1, "nodes": [0.2, 0.2, 0.4, 0.2], "cells": [0, 1]}
    g = parse_mdgrid({"ambient_dim": 2, "subdomains": [TRIANGLE, seg]})
    assert g.higher_neighbors == {0: set(), 1: set()}
    assert g.lower_neighbors == {0: set(), 1: set()}


def test_interface_between_equal_dimensions():
    other = dict(TRIANGLE, id=1, nodes=[1, 0, 1, 1, 0, 1])
    doc = {
        "ambient_dim": 2,
        "subdomains": [TRIANGLE, other],
        "interfaces": [{"lower_id": 1, "higher_id": 0, "dim": 1, "nodes": [1, 0, 0, 1], "cells": [0, 1]}],
    }
    with pytest.raises(GridValidationError, match="dimension gap"):
        parse_mdgrid(doc)


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        load_mdgrid(path)


def test_missing_field():
    with pytest.raises(FormatError, match="nodes"):
        parse_mdgrid({"ambient_dim": 2, "subdomains": [{"dim": 2, "cells": [0, 1, 2]}]})


def test_tags_by_nodes_and_default():
    doc = {"ambient_dim": 2, "subdomains": [dict(TRIANGLE, boundary_tags=[{"nodes": [1, 2], "tag": "neumann"}],
                                                 default_tag="dirichlet")]}
    sd = parse_mdgrid(doc).subdomains[0]
    assert sorted(sd.face_tags.tolist()) == [BoundaryTag.DIRICHLET, BoundaryTag.DIRICHLET, BoundaryTag.NEUMANN]


def test_unknown_tag():
    doc = {"ambient_dim": 2, "subdomains": [dict(TRIANGLE, boundary_tags=[{"face": 0, "tag": "robin"}])]}
    with pytest.raises(FormatError, match="robin"):
        parse_mdgrid(doc)


@pytest.mark.parametrize("with_overlaps", [False, True])
def test_round_trip(tmp_path, coarse_grid, with_overlaps):
    path = tmp_path / "grid.json"
    save_mdgrid(coarse_grid, path, with_overlaps=with_overlaps)
    g = load_mdgrid(path)
    for a, b in zip(coarse_grid.subdomains, g.subdomains):
        assert np.array_equal(a.mesh.cells, b.mesh.cells)
        assert np.allclose(a.mesh.nodes, b.mesh.nodes)
        assert np.array_equal(a.face_tags, b.face_tags)
    for a, b in zip(coarse_grid.interfaces, g.interfaces):
        assert np.array_equal(a.higher_faces, b.higher_faces)
        assert a.overlaps_higher.measure.sum() == pytest.approx(b.overlaps_higher.measure.sum())
    assert mdgrid_to_dict(g) == mdgrid_to_dict(coarse_grid)


def test_problem_data(coarse_grid):
    doc = {"K": [1.0, 1e-4], "kappa": 2.0, "f": ["validation", -2.0], "g_D": ["validation", None]}
    data = parse_problem_data(doc, coarse_grid)
    assert np.all(data.K[1] == 1e-4)
    assert np.all(data.kappa[0] == 2.0)
    assert data.f[0](np.array([[0.75, 0.5]]))[0] == 0.0


def test_linear_field(coarse_grid):
    doc = {"K": 1.0, "kappa": 1.0, "g_D": [{"linear": [1.0, 2.0, 0.0]}, None]}
    data = parse_problem_data(doc, coarse_grid)
    assert data.g_D[0](np.array([[0.5, 0.1]])) == pytest.approx([2.0])


def test_missing_kappa(coarse_grid, tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"K": 1.0, "g_D": ["validation", None]}))
    with pytest.raises(DataError, match="kappa"):
        load_problem_data(path, coarse_grid)


def test_wrong_list_length(coarse_grid):
    with pytest.raises(DataError):
        parse_problem_data({"K": [1.0, 1.0, 1.0], "kappa": 1.0, "g_D": 0.0}, coarse_grid)


def test_unknown_named_field(coarse_grid):
    with pytest.raises(DataError, match="named field"):
        parse_problem_data({"K": 1.0, "kappa": 1.0, "f": "gauss", "g_D": [0.0, None]}, coarse_grid)
