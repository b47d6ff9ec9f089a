"""Piecewise-constant transfer operators between traces, mortars and lower cells.

All mortar quantities are densities (per unit measure). With overlap
measures ``w(t, s)`` between a target cell ``t`` and a source item ``s``,
every operator here has the form

    target[t] = sum_s w(t, s) * source[s] / |t|

which averages intensive values and conserves integrals of densities at
the same time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .grid import MDGrid, MortarInterface


@dataclass(frozen=True)
class ProjectionMap:
    """Sparse weights ``target = weights @ source``.

    Parameters
    ----------
    source_space, target_space : str
        One of ``"higher_faces"``, ``"lower_cells"``, ``"mortar_cells"``.
    semantics : str
        ``"average"`` or ``"integrate"``. Both share the same weights for
        P0 densities; the tag records the intent.
    weights : scipy.sparse.csr_matrix
    """

    source_space: str
    target_space: str
    semantics: str
    weights: sps.csr_matrix

    def __call__(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.weights.shape[1]:
            raise ValueError(
                f"length mismatch: expected {self.weights.shape[1]} values, got {values.shape[0]}"
            )
        return self.weights @ values


def _require(iface: MortarInterface) -> None:
    if iface.overlaps_higher is None or iface.overlaps_lower is None:
        raise ValueError(f"overlaps of interface {iface.id} have not been computed")


def trace_to_mortar_map(iface: MortarInterface, num_faces: int) -> ProjectionMap:
    """Map from all faces of the higher subdomain to the mortar cells."""
    _require(iface)
    ov = iface.overlaps_higher
    area = iface.mortar_mesh.cell_volumes
    w = sps.csr_matrix(
        (ov.measure / area[ov.mortar], (ov.mortar, ov.other)),
        shape=(iface.num_cells, num_faces),
    )
    return ProjectionMap("higher_faces", "mortar_cells", "integrate", w)


def lower_to_mortar_map(iface: MortarInterface, num_lower: int) -> ProjectionMap:
    _require(iface)
    ov = iface.overlaps_lower
    area = iface.mortar_mesh.cell_volumes
    w = sps.csr_matrix(
        (ov.measure / area[ov.mortar], (ov.mortar, ov.other)),
        shape=(iface.num_cells, num_lower),
    )
    return ProjectionMap("lower_cells", "mortar_cells", "average", w)


def mortar_to_lower_map(iface: MortarInterface, lower_volumes: np.ndarray) -> ProjectionMap:
    _require(iface)
    ov = iface.overlaps_lower
    w = sps.csr_matrix(
        (ov.measure / lower_volumes[ov.other], (ov.other, ov.mortar)),
        shape=(lower_volumes.size, iface.num_cells),
    )
    return ProjectionMap("mortar_cells", "lower_cells", "integrate", w)


def mortar_to_trace_map(iface: MortarInterface, face_areas: np.ndarray) -> ProjectionMap:
    """Extensive transfer of mortar densities onto the higher-side faces."""
    _require(iface)
    ov = iface.overlaps_higher
    w = sps.csr_matrix(
        (ov.measure / face_areas[ov.other], (ov.other, ov.mortar)),
        shape=(face_areas.size, iface.num_cells),
    )
    return ProjectionMap("mortar_cells", "higher_faces", "integrate", w)


def _face_values_full(iface: MortarInterface, face_values) -> np.ndarray:
    # accept values on the interface faces only, or on all faces of the mesh
    face_values = np.asarray(face_values, dtype=float)
    n_if = iface.higher_faces.size
    if face_values.shape[0] == n_if:
        full = np.zeros(int(iface.higher_faces.max()) + 1 if n_if else 0)
        full[iface.higher_faces] = face_values
        return full
    return face_values


def project_trace_to_mortar(iface: MortarInterface, face_values) -> np.ndarray:
    """Transfer a per-face density of the higher side onto the mortar cells.

    ``face_values`` is indexed either like ``iface.higher_faces`` or by the
    face index of the whole higher-dimensional mesh.
    """
    _require(iface)
    full = _face_values_full(iface, face_values)
    ov = iface.overlaps_higher
    if full.shape[0] <= ov.other.max(initial=-1):
        raise ValueError("length mismatch between face values and interface faces")
    out = np.zeros(iface.num_cells)
    np.add.at(out, ov.mortar, ov.measure * full[ov.other])
    return out / iface.mortar_mesh.cell_volumes


def project_lower_to_mortar(iface: MortarInterface, cell_values) -> np.ndarray:
    """Average lower-dimensional cell values onto the mortar cells."""
    _require(iface)
    cell_values = np.asarray(cell_values, dtype=float)
    ov = iface.overlaps_lower
    if cell_values.shape[0] <= ov.other.max(initial=-1):
        raise ValueError("length mismatch between lower cell values and the interface")
    out = np.zeros(iface.num_cells)
    np.add.at(out, ov.mortar, ov.measure * cell_values[ov.other])
    return out / iface.mortar_mesh.cell_volumes


def extend_mortar_to_lower(iface: MortarInterface, mortar_density, num_lower: int | None = None) -> np.ndarray:
    """Distribute a mortar density onto the lower cells, conserving its integral."""
    _require(iface)
    mortar_density = np.asarray(mortar_density, dtype=float)
    if mortar_density.shape[0] != iface.num_cells:
        raise ValueError(
            f"length mismatch: interface {iface.id} has {iface.num_cells} mortar cells, "
            f"got {mortar_density.shape[0]} values"
        )
    ov = iface.overlaps_lower
    n = int(ov.other.max(initial=-1)) + 1 if num_lower is None else num_lower
    integ = np.zeros(n)
    meas = np.zeros(n)
    np.add.at(integ, ov.other, ov.measure * mortar_density[ov.mortar])
    np.add.at(meas, ov.other, ov.measure)
    return np.divide(integ, meas, out=np.zeros(n), where=meas > 0)


def mortar_jump(grid: MDGrid, lam, i: int) -> np.ndarray:
    """Sum of the mortar densities of all interfaces whose lower side is ``i``.

    Parameters
    ----------
    lam : sequence of arrays
        Mortar densities indexed by interface id.
    """
    if not 0 <= i < len(grid.subdomains):
        raise ValueError(f"unknown subdomain id {i}")
    sd = grid.subdomains[i]
    out = np.zeros(sd.mesh.num_cells)
    for e in grid.interfaces_of_lower(i):
        out += extend_mortar_to_lower(e, lam[e.id], sd.mesh.num_cells)
    return out
