"""Refinement studies on the validation problem and estimate runs on files."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .discretize import DiscreteSolution, check_local_conservation, solve_problem
from .estimate import ErrorReport, assemble_report, verify_guaranteed_bound
from .exact import (
    Effectivity,
    effectivity,
    true_flux_error,
    true_pressure_error,
    validation_problem,
    validation_solution,
)
from .grid import TABLE1_LEVELS, MDGrid, build_validation_grid
from .problem import ProblemData, integrate_field
from .reconstruct import NodalP1Pressure, reconstruct_pressure

METHODS = ("tpfa", "rt0")

# study table columns first, then extra diagnostics
CSV_COLUMNS = (
    "method",
    "level",
    "h_trace",
    "h_mortar",
    "h_fracture",
    "eps_Omega2",
    "eps_Omega1",
    "eps_Gamma12",
    "M_h",
    "err_p",
    "err_u",
    "I_p",
    "I_u",
    "I_pu",
    "eta_R",
    "M_eps",
    "xi",
    "max_conservation_residual",
)


@dataclass
class LevelResult:
    method: str
    level: str
    zeta: tuple
    grid: MDGrid
    data: ProblemData
    solution: DiscreteSolution
    reconstruction: NodalP1Pressure
    report: ErrorReport
    err_p: float
    err_u: float
    indices: Effectivity
    conservation: float
    source_scale: float
    bound_holds: bool
    seconds: float

    def row(self) -> dict:
        rep = self.report
        return {
            "method": self.method,
            "level": self.level,
            "h_trace": self.zeta[0],
            "h_mortar": self.zeta[1],
            "h_fracture": self.zeta[2],
            "eps_Omega2": rep.eps_subdomain[0],
            "eps_Omega1": rep.eps_subdomain[1],
            "eps_Gamma12": float(np.sqrt(np.sum(rep.eps_interface ** 2))),
            "M_h": rep.majorant,
            "err_p": self.err_p,
            "err_u": self.err_u,
            "I_p": self.indices.I_p,
            "I_u": self.indices.I_u,
            "I_pu": self.indices.I_pu,
            "eta_R": rep.residual,
            "M_eps": rep.scaled_majorant,
            "xi": rep.xi,
            "max_conservation_residual": self.conservation,
        }


def parse_levels(text: str) -> List[tuple]:
    """Parse ``preset:table1``, 1-based level numbers or ``a:b:c`` triplets.

    Items are separated by commas, e.g. ``1,3,0.05:0.1:0.07``.
    """
    text = text.strip()
    if text == "preset:table1":
        return [(f"zeta{k + 1}", z) for k, z in enumerate(TABLE1_LEVELS)]
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ValueError(f"level {item!r}: expected three mesh sizes h_trace:h_mortar:h_fracture")
            out.append((item, tuple(float(p) for p in parts)))
            continue
        name = item[4:] if item.startswith("zeta") else item
        try:
            k = int(name)
        except ValueError:
            raise ValueError(f"unknown level {item!r}") from None
        if not 1 <= k <= len(TABLE1_LEVELS):
            raise ValueError(f"level {item!r} out of range 1..{len(TABLE1_LEVELS)}")
        out.append((f"zeta{k}", TABLE1_LEVELS[k - 1]))
    if not out:
        raise ValueError("at least one refinement level is required")
    return out


def run_level(
    zeta: Sequence[float],
    method: str,
    level: str = "",
    quad_degree: int = 6,
    norm_convention: str = "pointwise",
) -> LevelResult:
    """Solve, reconstruct, estimate and compare with the exact solution."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    t0 = time.perf_counter()
    grid = build_validation_grid(zeta)
    data = validation_problem(grid)
    sol = solve_problem(grid, data, method)
    rec = reconstruct_pressure(grid, sol, data)
    rep = assemble_report(grid, data, sol, rec, norm_convention=norm_convention)
    exact = validation_solution(grid)
    e_p = true_pressure_error(grid, rec, exact, data, degree=quad_degree)
    e_u = true_flux_error(grid, sol, exact, data, degree=quad_degree)
    idx = effectivity(rep.majorant, e_p, e_u, rep.residual)
    cons = max(float(c.max(initial=0.0)) for c in check_local_conservation(grid, sol, data))
    scale = max(float(np.abs(integrate_field(data.f[sd.id], grid, sd.id)).max(initial=0.0)) for sd in grid.subdomains)
    bound = verify_guaranteed_bound(rep, (e_p, e_u)).holds
    return LevelResult(
        method, level, tuple(float(z) for z in zeta), grid, data, sol, rec, rep,
        e_p, e_u, idx, cons, scale, bound, time.perf_counter() - t0,
    )


def format_csv(rows: Sequence[dict], columns: Sequence[str] = CSV_COLUMNS) -> str:
    """Comma-separated table with ``%.5e`` floats and LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.5e" % float(v)
    return str(v)


def report_rows(grid: MDGrid, report: ErrorReport) -> List[dict]:
    """Long-format rows ``quantity, id, value`` for an estimate run."""
    rows = [
        {"quantity": "M_h", "id": "", "value": report.majorant},
        {"quantity": "M_eps", "id": "", "value": report.scaled_majorant},
        {"quantity": "xi", "id": "", "value": report.xi},
        {"quantity": "eta_DF", "id": "", "value": report.diffusive},
        {"quantity": "eta_R", "id": "", "value": report.residual},
    ]
    for sd in grid.subdomains:
        i = sd.id
        rows += [
            {"quantity": "beta", "id": i, "value": report.beta[i]},
            {"quantity": "gamma", "id": i, "value": report.gamma[i]},
            {"quantity": "eps_DF_subdomain", "id": i, "value": report.eps_df_subdomain[i]},
            {"quantity": "eps_R_subdomain", "id": i, "value": report.eps_r_subdomain[i]},
            {"quantity": "eps_subdomain", "id": i, "value": report.eps_subdomain[i]},
        ]
    for e in grid.interfaces:
        rows.append({"quantity": "eps_interface", "id": e.id, "value": report.eps_interface[e.id]})
    return rows
