"""Command-line driver for validation studies and estimate runs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 guaranteed-bound violation.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from .discretize import AssemblyError, SolverError, solve_problem
from .estimate import NORM_CONVENTIONS, ErrorReport, assemble_report
from .grid import GridValidationError
from .io import FormatError, load_mdgrid, load_problem_data
from .mesh import MeshError
from .problem import DataError
from .reconstruct import ReconstructionError, reconstruct_pressure
from .study import METHODS, format_csv, parse_levels, report_rows, run_level
from .vtk import write_vtk

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUND = 4

log = logging.getLogger("mdaposteriori")

DEFAULTS = {
    "method": "rt0",
    "levels": "preset:table1",
    "quad_degree": 6,
    "norm_convention": "pointwise",
}


class ConfigError(ValueError):
    """Invalid command-line or config-file settings."""


@dataclass
class StudyConfig:
    command: str
    method: str = DEFAULTS["method"]
    refinements: List[tuple] = field(default_factory=list)
    out: Optional[Path] = None
    vtk: Optional[Path] = None
    mesh: Optional[Path] = None
    data: Optional[Path] = None
    quad_degree: int = DEFAULTS["quad_degree"]
    norm_convention: str = DEFAULTS["norm_convention"]

    @property
    def emit_vtk(self) -> bool:
        return self.vtk is not None

    def validate(self) -> None:
        if self.command not in ("validate", "estimate"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.norm_convention not in NORM_CONVENTIONS:
            raise ConfigError(f"unknown norm convention {self.norm_convention!r}")
        if self.quad_degree < 1:
            raise ConfigError("quadrature degree must be positive")
        if self.out is None:
            raise ConfigError("an output path (--out) is required")
        if self.command == "validate" and not self.refinements:
            raise ConfigError("at least one refinement level is required")
        if self.command == "estimate" and (self.mesh is None or self.data is None):
            raise ConfigError("estimate needs --mesh and --data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdaposteriori",
        description="A posteriori error estimates for mixed-dimensional Darcy flow.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with a [validate] or [estimate] section; flags override it")
    common.add_argument("--method", help=f"discretization, one of {METHODS} (default: {DEFAULTS['method']})")
    common.add_argument("--out", type=Path, help="output CSV path")
    common.add_argument("--norm-convention", dest="norm_convention",
                        help=f"coefficient norms, one of {NORM_CONVENTIONS} (default: {DEFAULTS['norm_convention']})")

    val = sub.add_parser("validate", parents=[common], help="refinement study on the 2-d validation problem",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    val.add_argument("--levels", help="'preset:table1', level numbers 1-5 or h_trace:h_mortar:h_fracture triplets, "
                     f"comma separated (default: {DEFAULTS['levels']})")
    val.add_argument("--vtk-dir", dest="vtk_dir", type=Path, help="write one VTK file per level into this directory")
    val.add_argument("--quad-degree", dest="quad_degree", type=int,
                     help=f"quadrature degree of the true errors (default: {DEFAULTS['quad_degree']})")

    est = sub.add_parser("estimate", parents=[common], help="estimators for a mesh and data file",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    est.add_argument("--mesh", type=Path, help="MDMesh JSON file")
    est.add_argument("--data", type=Path, help="problem data JSON file")
    est.add_argument("--vtk", type=Path, help="VTK output with per-cell squared estimators")
    return parser


def _read_config(path: Optional[Path], section: str) -> dict:
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        if not parser.read(path, encoding="utf-8"):
            raise ConfigError(f"cannot read config file {path}")
    except configparser.Error as err:
        raise ConfigError(f"malformed config file {path}: {err}") from err
    if not parser.has_section(section):
        return {}
    known = {"method", "levels", "out", "vtk_dir", "vtk", "quad_degree", "mesh", "data", "norm_convention"}
    items = {k.replace("-", "_"): v for k, v in parser.items(section)}
    unknown = set(items) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return items


def make_config(args: argparse.Namespace) -> StudyConfig:
    """Merge defaults, config file and flags (flags win)."""
    settings = dict(DEFAULTS)
    settings.update(_read_config(args.config, args.command))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command", "verbose"):
            settings[key] = value

    def path(key):
        v = settings.get(key)
        return None if v is None else Path(v)

    try:
        quad = int(settings["quad_degree"])
    except ValueError:
        raise ConfigError(f"quadrature degree must be an integer, got {settings['quad_degree']!r}") from None
    cfg = StudyConfig(
        command=args.command,
        method=str(settings["method"]).lower(),
        out=path("out"),
        vtk=path("vtk_dir") if args.command == "validate" else path("vtk"),
        mesh=path("mesh"),
        data=path("data"),
        quad_degree=quad,
        norm_convention=str(settings["norm_convention"]),
    )
    if args.command == "validate":
        try:
            cfg.refinements = parse_levels(str(settings["levels"]))
        except ValueError as err:
            raise ConfigError(str(err)) from err
    cfg.validate()
    return cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_validate(cfg: StudyConfig) -> int:
    """Run every configured level and write the study table."""
    rows, violated = [], []
    for name, zeta in cfg.refinements:
        try:
            res = run_level(zeta, cfg.method, name, cfg.quad_degree, cfg.norm_convention)
        except (SolverError, AssemblyError, ReconstructionError) as err:
            raise SolverError(f"level {name}: {err}") from err
        log.info("%s %s: M_h=%.4e e_p=%.4e e_u=%.4e (%.1f s)", cfg.method, name,
                 res.report.majorant, res.err_p, res.err_u, res.seconds)
        rows.append(res.row())
        if cfg.vtk is not None:
            cfg.vtk.mkdir(parents=True, exist_ok=True)
            write_vtk(res.grid, res.report, cfg.vtk / f"{cfg.method}_{name.replace(':', '_')}.vtk")
        if not res.bound_holds:
            violated.append(name)
    _write(cfg.out, format_csv(rows))
    if violated:
        log.error("guaranteed bound violated at levels %s", ", ".join(violated))
        return EXIT_BOUND
    return EXIT_OK


def run_estimate(cfg: StudyConfig) -> ErrorReport:
    """Solve on a mesh file, write the estimator CSV and optional VTK."""
    grid = load_mdgrid(cfg.mesh)
    data = load_problem_data(cfg.data, grid)
    sol = solve_problem(grid, data, cfg.method)
    rec = reconstruct_pressure(grid, sol, data)
    report = assemble_report(grid, data, sol, rec, norm_convention=cfg.norm_convention)
    _write(cfg.out, format_csv(report_rows(grid, report), ("quantity", "id", "value")))
    if cfg.vtk is not None:
        cfg.vtk.parent.mkdir(parents=True, exist_ok=True)
        write_vtk(grid, report, cfg.vtk)
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(args)
        if cfg.command == "validate":
            return run_validate(cfg)
        run_estimate(cfg)
        return EXIT_OK
    except (ConfigError, DataError, FormatError, GridValidationError, MeshError, FileNotFoundError) as err:
        log.error("%s", err)
        return EXIT_CONFIG
    except (SolverError, AssemblyError, ReconstructionError, FloatingPointError) as err:
        log.error("numerical failure: %s", err)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
