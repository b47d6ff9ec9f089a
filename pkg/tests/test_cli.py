import json
import subprocess
import sys

import pytest

from mdaposteriori.cli import EXIT_BOUND, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from mdaposteriori.grid import build_validation_grid
from mdaposteriori.io import save_mdgrid

COARSE = "0.125:0.25:0.1"


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_validate_single_level(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["validate", "--method", "rt0", "--levels", COARSE, "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["method"] == "rt0"


def test_validate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        main(["validate", "--method", "tpfa", "--levels", COARSE, "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_unknown_method(tmp_path):
    assert main(["validate", "--method", "mpfa", "--levels", "1", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_bad_levels(tmp_path):
    assert main(["validate", "--levels", "9", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_missing_out():
    assert main(["validate", "--levels", "1"]) == EXIT_CONFIG


def test_bad_flag():
    assert main(["validate", "--bogus"]) == EXIT_CONFIG


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "study.ini"
    out = tmp_path / "c.csv"
    cfg.write_text(f"[validate]\nmethod = tpfa\nlevels = {COARSE}\nout = {out}\nquad-degree = 4\n")
    assert main(["validate", "--config", str(cfg)]) == EXIT_OK
    assert read_csv(out)[0]["method"] == "tpfa"
    assert main(["validate", "--config", str(cfg), "--method", "rt0"]) == EXIT_OK
    assert read_csv(out)[0]["method"] == "rt0"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "study.ini"
    cfg.write_text("[validate]\nsolver = pardiso\n")
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_vtk_dir(tmp_path):
    out, vtk = tmp_path / "t.csv", tmp_path / "vtk"
    assert main(["validate", "--levels", COARSE, "--out", str(out), "--vtk-dir", str(vtk)]) == EXIT_OK
    assert len(list(vtk.glob("*.vtk"))) == 1


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("est")
    save_mdgrid(build_validation_grid((0.125, 0.25, 0.1)), d / "mesh.json")
    (d / "data.json").write_text(json.dumps({"K": 1.0, "kappa": 1.0, "f": ["validation", -2.0],
                                             "g_D": ["validation", None]}))
    (d / "block.json").write_text(json.dumps({"K": [1.0, 1e-4], "kappa": 1e-4, "f": ["validation", -2.0],
                                              "g_D": ["validation", None]}))
    (d / "nokappa.json").write_text(json.dumps({"K": 1.0, "g_D": ["validation", None]}))
    return d


def estimate_values(path):
    return {(r["quantity"], r["id"]): float(r["value"]) for r in read_csv(path)}


def test_estimate_matches_validate(tmp_path, files):
    est, val = tmp_path / "e.csv", tmp_path / "v.csv"
    vtk = tmp_path / "e.vtk"
    assert main(["estimate", "--mesh", str(files / "mesh.json"), "--data", str(files / "data.json"),
                 "--out", str(est), "--vtk", str(vtk)]) == EXIT_OK
    assert main(["validate", "--levels", COARSE, "--out", str(val)]) == EXIT_OK
    assert estimate_values(est)[("M_h", "")] == float(read_csv(val)[0]["M_h"])
    assert vtk.exists()


def test_blocking_fracture_scaling(tmp_path, files):
    out = tmp_path / "b.csv"
    assert main(["estimate", "--mesh", str(files / "mesh.json"), "--data", str(files / "block.json"),
                 "--out", str(out)]) == EXIT_OK
    v = estimate_values(out)
    # xi comes from the unit matrix permeability
    assert v[("xi", "")] == 1.0
    assert v[("beta", "1")] == pytest.approx(1e-2, rel=1e-5)
    assert v[("M_eps", "")] == pytest.approx(v[("M_h", "")] / v[("xi", "")], rel=1e-5)


def test_estimate_missing_kappa(tmp_path, files):
    code = main(["estimate", "--mesh", str(files / "mesh.json"), "--data", str(files / "nokappa.json"),
                 "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_CONFIG


def test_estimate_missing_file(tmp_path, files):
    code = main(["estimate", "--mesh", str(tmp_path / "none.json"), "--data", str(files / "data.json"),
                 "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_CONFIG


def test_estimate_singular_problem(tmp_path):
    doc = {"ambient_dim": 2, "subdomains": [{"dim": 2, "nodes": [0, 0, 1, 0, 0, 1], "cells": [0, 1, 2],
                                             "default_tag": "neumann"}]}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    (tmp_path / "d.json").write_text(json.dumps({"K": 1.0, "kappa": 1.0, "g_N": 0.0}))
    code = main(["estimate", "--mesh", str(tmp_path / "m.json"), "--data", str(tmp_path / "d.json"),
                 "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_NUMERICAL


def test_bound_violation_exit_code(tmp_path, monkeypatch):
    import mdaposteriori.cli as cli
    from mdaposteriori.study import run_level

    def broken(*args, **kw):
        res = run_level(*args, **kw)
        res.bound_holds = False
        return res

    monkeypatch.setattr(cli, "run_level", broken)
    assert main(["validate", "--levels", COARSE, "--out", str(tmp_path / "x.csv")]) == EXIT_BOUND


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "mdaposteriori", "validate", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "preset:table1" in res.stdout and "--quad-degree" in res.stdout
