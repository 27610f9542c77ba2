"""Discrete-ordinates transport on triangulated 2D domains.

DG discretization in space with optional streamline-diffusion stabilization,
trapezoid-rule discrete ordinates in angle, layered upwind sweeps, and
source iteration for the scattering coupling. The analysis module carries
manufactured solutions and the error norms used for convergence studies.
"""

from .analysis import (
    ConvergenceTable,
    ErrorReport,
    ManufacturedCase,
    MethodComparison,
    case_problem,
    case_quadrature,
    compare_methods,
    convergence_study,
    error_norms,
    make_case,
)
from .angular import (
    AngularQuadrature,
    PhaseFunction,
    gauss_legendre_sphere,
    m_bound,
    phase_eval,
    scatter_matrix,
    trapezoid_circle,
)
from .dg_core import (
    DGSolution,
    ElementBasis,
    LocalSystem,
    assemble_local,
    element_basis,
    eval_field,
    project_exact,
    solve_local,
    zero_solution,
)
from .errors import (
    AssumptionError,
    MeshError,
    NonConvergenceError,
    StabilityError,
    SweepCycleError,
)
from .mesh import (
    BOUNDARY,
    EdgeClassification,
    TriangleMesh,
    build_mesh,
    build_structured_unit_square,
    classify_edges,
    load_mesh,
    opposite_local_edge,
    refine_regular,
    save_mesh,
)
from .quadrature import TriangleRule, edge_rule, triangle_rule
from .solver import (
    SolveReport,
    SolverConfig,
    TransportProblem,
    apply_ah,
    delta_value,
    scattering_source,
    solve,
    triple_norm_stability,
    weighted_norm,
)
from .sweep import (
    EPS_N,
    NO_UPWIND,
    DirectionKernel,
    SweepSchedule,
    build_kernel,
    build_schedule,
    space_tables,
    sweep_direction,
    thread_count,
)

__version__ = "0.1.0"

__all__ = [
    "AngularQuadrature",
    "AssumptionError",
    "BOUNDARY",
    "ConvergenceTable",
    "DGSolution",
    "DirectionKernel",
    "EPS_N",
    "EdgeClassification",
    "ElementBasis",
    "ErrorReport",
    "LocalSystem",
    "ManufacturedCase",
    "MeshError",
    "MethodComparison",
    "NO_UPWIND",
    "NonConvergenceError",
    "PhaseFunction",
    "SolveReport",
    "SolverConfig",
    "StabilityError",
    "SweepCycleError",
    "SweepSchedule",
    "TransportProblem",
    "TriangleMesh",
    "TriangleRule",
    "apply_ah",
    "assemble_local",
    "build_kernel",
    "build_mesh",
    "build_schedule",
    "build_structured_unit_square",
    "case_problem",
    "case_quadrature",
    "classify_edges",
    "compare_methods",
    "convergence_study",
    "delta_value",
    "edge_rule",
    "element_basis",
    "error_norms",
    "eval_field",
    "gauss_legendre_sphere",
    "load_mesh",
    "m_bound",
    "make_case",
    "opposite_local_edge",
    "phase_eval",
    "project_exact",
    "refine_regular",
    "save_mesh",
    "scatter_matrix",
    "scattering_source",
    "solve",
    "solve_local",
    "space_tables",
    "sweep_direction",
    "thread_count",
    "trapezoid_circle",
    "triangle_rule",
    "triple_norm_stability",
    "weighted_norm",
    "zero_solution",
]
