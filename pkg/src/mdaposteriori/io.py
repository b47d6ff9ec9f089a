"""JSON readers and writers for mixed-dimensional meshes and problem data.

The formats are described in ``docs/mdmesh_format.md``.
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Union

import numpy as np

from .grid import (
    BoundaryTag,
    GridValidationError,
    MDGrid,
    MortarInterface,
    Overlaps,
    assemble_mdgrid,
    make_subdomain,
)
from .mesh import MeshError, make_mesh
from .problem import DataError, ProblemData, make_problem

PathLike = Union[str, Path]

_TAG_NAMES = {
    "dirichlet": BoundaryTag.DIRICHLET,
    "neumann": BoundaryTag.NEUMANN,
    "tip": BoundaryTag.TIP,
    "internal": BoundaryTag.INTERNAL,
}


class FormatError(ValueError):
    """A mesh or data file cannot be parsed."""


def _read_json(path: PathLike) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: malformed JSON ({err})") from err


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _mesh_from(obj: dict, dim: int, ambient: int, where: str):
    nodes = np.asarray(_require(obj, "nodes", where), dtype=float)
    cells = np.asarray(_require(obj, "cells", where), dtype=np.int64)
    if nodes.size % ambient:
        raise FormatError(f"{where}: node list length is not a multiple of {ambient}")
    if cells.size % (dim + 1):
        raise FormatError(f"{where}: cell list length is not a multiple of {dim + 1}")
    return make_mesh(dim, nodes.reshape(-1, ambient), cells.reshape(-1, dim + 1))


def _face_lookup(mesh):
    return {tuple(f): k for k, f in enumerate(mesh.faces.tolist())}


def _parse_subdomain(obj: dict, ambient: int, index: int):
    where = f"subdomain {index}"
    sid = int(obj.get("id", index))
    dim = int(_require(obj, "dim", where))
    mesh = _mesh_from(obj, dim, ambient, where)
    tags = np.zeros(mesh.num_faces, dtype=np.int64)
    iface = -np.ones(mesh.num_faces, dtype=np.int64)
    lookup = None
    entries = obj.get("boundary_tags", [])
    if isinstance(entries, dict):
        entries = [{"face": int(k), **(v if isinstance(v, dict) else {"tag": v})} for k, v in entries.items()]
    for entry in entries:
        name = str(_require(entry, "tag", where)).lower()
        if name not in _TAG_NAMES:
            raise FormatError(f"{where}: unknown boundary tag {name!r}")
        if "face" in entry:
            f = int(entry["face"])
            if not 0 <= f < mesh.num_faces:
                raise FormatError(f"{where}: face index {f} out of range")
        else:
            lookup = lookup or _face_lookup(mesh)
            key = tuple(sorted(int(n) for n in _require(entry, "nodes", where)))
            if key not in lookup:
                raise FormatError(f"{where}: no face with nodes {key}")
            f = lookup[key]
        tags[f] = _TAG_NAMES[name]
        if name == "internal":
            iface[f] = int(_require(entry, "interface", where))
    default = obj.get("default_tag")
    if default is not None:
        bnd = mesh.boundary_faces
        unset = bnd[tags[bnd] == BoundaryTag.NONE]
        tags[unset] = _TAG_NAMES[str(default).lower()]
    return make_subdomain(sid, mesh, tags, iface)


def _parse_overlaps(rows, where: str):
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    if np.any(arr[:, 2] < 0):
        raise FormatError(f"{where}: negative overlap measure")
    return Overlaps(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])


def parse_mdgrid(doc: dict) -> MDGrid:
    """Build a validated MDGrid from a parsed MDMesh document."""
    ambient = int(_require(doc, "ambient_dim", "header"))
    sds = [_parse_subdomain(obj, ambient, k) for k, obj in enumerate(_require(doc, "subdomains", "header"))]
    sds.sort(key=lambda s: s.id)
    ifaces = []
    explicit = []
    for k, obj in enumerate(doc.get("interfaces", [])):
        where = f"interface {k}"
        lower, higher = int(_require(obj, "lower_id", where)), int(_require(obj, "higher_id", where))
        if not (0 <= lower < len(sds) and 0 <= higher < len(sds)):
            raise GridValidationError(f"dangling interface {k}: unknown subdomain")
        dim = sds[lower].dim
        if sds[higher].dim - dim != 1:
            raise GridValidationError(f"dimension gap of {where} is {sds[higher].dim - dim}, expected 1")
        mortar = _mesh_from(obj, dim, ambient, where)
        e = MortarInterface(
            id=int(obj.get("id", k)), lower_id=lower, higher_id=higher,
            side=str(obj.get("side", "plus")), mortar_mesh=mortar,
        )
        ifaces.append(e)
        explicit.append(
            (obj.get("overlaps_higher"), obj.get("overlaps_lower"))
        )
    ifaces.sort(key=lambda e: e.id)
    if any(v[0] is not None for v in explicit):
        ifaces = [
            dataclasses.replace(
                e,
                overlaps_higher=_parse_overlaps(h, f"interface {e.id}") if h is not None else None,
                overlaps_lower=_parse_overlaps(lo, f"interface {e.id}") if lo is not None else None,
            )
            for e, (h, lo) in zip(ifaces, explicit)
        ]
    return assemble_mdgrid(ambient, sds, ifaces)


def load_mdgrid(path: PathLike) -> MDGrid:
    """Read an MDMesh JSON file.

    Raises
    ------
    FormatError
        Malformed file.
    GridValidationError, MeshError
        The content violates a grid invariant.
    """
    return parse_mdgrid(_read_json(path))


def _tag_name(tag: int) -> str:
    return BoundaryTag(tag).name.lower()


def mdgrid_to_dict(grid: MDGrid, with_overlaps: bool = False) -> dict:
    doc = {"ambient_dim": grid.ambient_dim, "subdomains": [], "interfaces": []}
    for sd in grid.subdomains:
        bnd = np.flatnonzero(sd.face_tags != BoundaryTag.NONE)
        tags = []
        for f in bnd.tolist():
            entry = {"nodes": sd.mesh.faces[f].tolist(), "tag": _tag_name(sd.face_tags[f])}
            if sd.face_tags[f] == BoundaryTag.INTERNAL:
                entry["interface"] = int(sd.face_interface[f])
            tags.append(entry)
        doc["subdomains"].append({
            "id": sd.id, "dim": sd.dim,
            "nodes": sd.mesh.nodes.ravel().tolist(),
            "cells": sd.mesh.cells.ravel().tolist(),
            "boundary_tags": tags,
        })
    for e in grid.interfaces:
        obj = {
            "id": e.id, "lower_id": e.lower_id, "higher_id": e.higher_id, "side": e.side,
            "nodes": e.mortar_mesh.nodes.ravel().tolist(),
            "cells": e.mortar_mesh.cells.ravel().tolist(),
        }
        if with_overlaps:
            for name in ("overlaps_higher", "overlaps_lower"):
                ov = getattr(e, name)
                obj[name] = np.column_stack([ov.mortar, ov.other, ov.measure]).tolist()
        doc["interfaces"].append(obj)
    return doc


def save_mdgrid(grid: MDGrid, path: PathLike, with_overlaps: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(mdgrid_to_dict(grid, with_overlaps), fh)


# --------------------------------------------------------------------------
# problem data
# --------------------------------------------------------------------------


def _named_field(name: str, kind: str):
    from . import exact

    table = {
        ("f", "validation"): exact.exact_f2,
        ("g_D", "validation"): exact.exact_p2,
    }
    try:
        return table[(kind, name)]
    except KeyError:
        raise DataError(f"unknown named field {name!r} for {kind}") from None


def _linear(coeffs):
    c = np.asarray(coeffs, dtype=float)
    return lambda x: c[0] + np.atleast_2d(x) @ c[1:]


def _field(value, kind: str):
    if value is None:
        return None
    if isinstance(value, str):
        return _named_field(value, kind)
    if isinstance(value, dict):
        if "linear" in value:
            return _linear(value["linear"])
        raise DataError(f"{kind}: unsupported field description {value!r}")
    return np.asarray(value, dtype=float) if isinstance(value, list) else float(value)


def _per_subdomain(doc, key, n, kind, required):
    if key not in doc:
        if required:
            raise DataError(f"data file: missing field {key!r}")
        return [None] * n
    v = doc[key]
    # a list is read per subdomain; per-cell values go one level deeper
    if isinstance(v, list):
        if len(v) != n:
            raise DataError(f"data file: {key!r} needs {n} entries, one per subdomain")
        return [_field(x, kind) for x in v]
    return [_field(v, kind)] * n


def parse_problem_data(doc: dict, grid: MDGrid) -> ProblemData:
    """Build ProblemData from a parsed data document.

    ``K``, ``f``, ``g_D`` and ``g_N`` hold one entry per subdomain (or a
    single entry for all); ``kappa`` one entry per interface (or a single
    value). Entries are numbers, per-cell (per-face) lists, a named field
    (``"validation"``) or ``{"linear": [c0, c1, ...]}`` for
    ``c0 + c1 x1 + ...``.
    """
    n = len(grid.subdomains)
    if "kappa" not in doc:
        raise DataError("data file: missing field 'kappa'")
    if "K" not in doc:
        raise DataError("data file: missing field 'K'")
    K = _per_subdomain(doc, "K", n, "K", True)
    kap = doc["kappa"]
    if isinstance(kap, list) and len(kap) == len(grid.interfaces):
        kappa = [np.asarray(v, float) if isinstance(v, list) else float(v) for v in kap]
    else:
        kappa = float(kap)
    f = _per_subdomain(doc, "f", n, "f", False)
    f = [0.0 if v is None else v for v in f]
    return make_problem(
        grid, K=K, kappa=kappa, f=f,
        g_D=_per_subdomain(doc, "g_D", n, "g_D", False),
        g_N=_per_subdomain(doc, "g_N", n, "g_N", False),
    )


def load_problem_data(path: PathLike, grid: MDGrid) -> ProblemData:
    return parse_problem_data(_read_json(path), grid)


__all__ = [
    "FormatError",
    "GridValidationError",
    "MeshError",
    "load_mdgrid",
    "load_problem_data",
    "mdgrid_to_dict",
    "parse_mdgrid",
    "parse_problem_data",
    "save_mdgrid",
]
