"""Legacy ASCII VTK export of the local estimators, plus a small reader."""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Union

import numpy as np

from .estimate import ErrorReport
from .grid import MDGrid

_VTK_TYPE = {0: 1, 1: 3, 2: 5, 3: 10}


def write_vtk(grid: MDGrid, report: ErrorReport, path: Union[str, Path]) -> None:
    """Write all subdomain and mortar cells with their squared estimators.

    Cell data arrays: ``eta_df_sq``, ``eta_r_sq`` and ``block`` (subdomain
    id, or number of subdomains plus interface id for mortar cells).
    """
    if report is None or not report.eta_df_cells:
        raise ValueError("empty report: nothing to write")
    n_sd = len(grid.subdomains)
    meshes = [sd.mesh for sd in grid.subdomains] + [e.mortar_mesh for e in grid.interfaces]
    df = list(report.eta_df_cells) + list(report.eta_df_mortar)
    rr = list(report.eta_r_cells) + [np.zeros(e.num_cells) for e in grid.interfaces]
    if sum(m.num_cells for m in meshes) == 0:
        raise ValueError("empty report: the grid has no cells")

    points, cells, types, df_sq, r_sq, block = [], [], [], [], [], []
    offset = 0
    for b, (mesh, d, r) in enumerate(zip(meshes, df, rr)):
        pts = np.zeros((mesh.num_nodes, 3))
        pts[:, : mesh.ambient_dim] = mesh.nodes
        points.append(pts)
        cells.extend((mesh.cells + offset).tolist())
        types.extend([_VTK_TYPE[mesh.dim]] * mesh.num_cells)
        df_sq.append(np.asarray(d) ** 2)
        r_sq.append(np.asarray(r) ** 2)
        block.append(np.full(mesh.num_cells, b))
        offset += mesh.num_nodes
    points = np.vstack(points)
    n_cells = len(cells)
    size = sum(len(c) + 1 for c in cells)

    lines = [
        "# vtk DataFile Version 3.0",
        f"a posteriori estimators ({n_sd} subdomains, {len(grid.interfaces)} interfaces)",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {points.shape[0]} double",
    ]
    lines += [" ".join(repr(float(v)) for v in p) for p in points]
    lines.append(f"CELLS {n_cells} {size}")
    lines += [" ".join(str(v) for v in [len(c)] + c) for c in cells]
    lines.append(f"CELL_TYPES {n_cells}")
    lines += [str(t) for t in types]
    lines.append(f"CELL_DATA {n_cells}")
    for name, arr, fmt in (
        ("eta_df_sq", np.concatenate(df_sq), repr),
        ("eta_r_sq", np.concatenate(r_sq), repr),
        ("block", np.concatenate(block), str),
    ):
        kind = "int" if name == "block" else "double"
        lines += [f"SCALARS {name} {kind} 1", "LOOKUP_TABLE default"]
        lines += [fmt(int(v) if kind == "int" else float(v)) for v in arr]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Parse a file written by :func:`write_vtk`.

    Returns ``points``, ``cells`` (list of index arrays), ``cell_types`` and
    one entry per cell data array.
    """
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    if not tokens[0].startswith("# vtk DataFile") or tokens[2].strip() != "ASCII":
        raise ValueError("not a legacy ASCII VTK file")
    if tokens[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError("only unstructured grids are supported")
    out: Dict[str, np.ndarray] = {}
    i = 4
    n_cells = 0
    while i < len(tokens):
        head = tokens[i].split()
        if not head:
            i += 1
            continue
        key = head[0]
        if key == "POINTS":
            n = int(head[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
            i += n + 1
        elif key == "CELLS":
            n_cells = int(head[1])
            rows = [[int(v) for v in tokens[i + 1 + k].split()] for k in range(n_cells)]
            if any(r[0] != len(r) - 1 for r in rows):
                raise ValueError("inconsistent cell connectivity")
            out["cells"] = [np.array(r[1:]) for r in rows]
            i += n_cells + 1
        elif key == "CELL_TYPES":
            n = int(head[1])
            out["cell_types"] = np.array([int(tokens[i + 1 + k]) for k in range(n)])
            i += n + 1
        elif key == "CELL_DATA":
            if int(head[1]) != n_cells:
                raise ValueError("cell data size does not match the number of cells")
            i += 1
        elif key == "SCALARS":
            name, kind = head[1], head[2]
            conv = int if kind == "int" else float
            out[name] = np.array([conv(tokens[i + 2 + k]) for k in range(n_cells)])
            i += n_cells + 2
        else:
            raise ValueError(f"unexpected section {key!r}")
    return out
