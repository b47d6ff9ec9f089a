"""A posteriori error estimates for mixed-dimensional Darcy flow.

The typical pipeline is::

    grid = build_validation_grid(TABLE1_LEVELS[0])
    data = validation_problem(grid)
    sol = solve_problem(grid, data, "rt0")
    rec = reconstruct_pressure(grid, sol, data)
    report = assemble_report(grid, data, sol, rec)
    report.majorant
"""
from .discretize import (
    AssemblyError,
    DiscreteSolution,
    LinearSystem,
    SolverError,
    assemble,
    assemble_rt0p0,
    assemble_tpfa,
    check_local_conservation,
    solve,
    solve_problem,
)
from .estimate import (
    BoundViolation,
    ErrorReport,
    assemble_report,
    scaled_majorant,
    verify_guaranteed_bound,
    xi_components,
)
from .exact import (
    ExactSolution,
    effectivity,
    true_flux_error,
    true_pressure_error,
    validation_problem,
    validation_solution,
)
from .grid import (
    TABLE1_LEVELS,
    BoundaryTag,
    CoverageError,
    GridValidationError,
    MDGrid,
    MortarInterface,
    Subdomain,
    assemble_mdgrid,
    build_validation_grid,
    compute_overlaps,
    make_subdomain,
)
from .io import FormatError, load_mdgrid, load_problem_data, save_mdgrid
from .mesh import MeshError, SimplexMesh, make_mesh
from .problem import DataError, ProblemData, make_problem
from .projections import (
    extend_mortar_to_lower,
    mortar_jump,
    project_lower_to_mortar,
    project_trace_to_mortar,
)
from .reconstruct import NodalP1Pressure, ReconstructionError, reconstruct_pressure
from .study import run_level
from .vtk import read_vtk, write_vtk

__version__ = "0.1.0"
