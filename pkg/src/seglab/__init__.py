"""Numerical laboratory for strongly competing densities under extremal
elliptic operators: disk-domain grids, barrier constructions, a fixed-point
solver for the coupled system, and segregation diagnostics."""

from .geometry import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    BoundarySegment,
    DomainMask,
    Grid,
    ScalarField,
    build_boundary_data,
    build_disk_domain,
    dump_field,
    load_field,
    oscillation,
)
from .pucci import (
    AlgebraReport,
    Ellipticity,
    SymMatrix,
    discrete_hessian,
    eigenvalues,
    pucci_field,
    pucci_minus,
    pucci_plus,
    run_algebra_suite,
)
from .barriers import (
    BarrierReport,
    BarrierSpec,
    RadialProfile,
    min_alpha,
    subsolution_barrier,
    supersolution_barrier,
    verify_barrier,
)
from .solver import (
    InnerResult,
    SolveConfig,
    SystemState,
    epsilon_continuation,
    fixed_point_solve,
    residual,
    solve_component,
    unclamped_drift,
)
from . import analysis

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY",
    "EXTERIOR",
    "INTERIOR",
    "AlgebraReport",
    "BarrierReport",
    "BarrierSpec",
    "BoundarySegment",
    "DomainMask",
    "Ellipticity",
    "Grid",
    "InnerResult",
    "RadialProfile",
    "ScalarField",
    "SolveConfig",
    "SymMatrix",
    "SystemState",
    "analysis",
    "build_boundary_data",
    "build_disk_domain",
    "discrete_hessian",
    "dump_field",
    "eigenvalues",
    "epsilon_continuation",
    "fixed_point_solve",
    "load_field",
    "min_alpha",
    "oscillation",
    "pucci_field",
    "pucci_minus",
    "pucci_plus",
    "residual",
    "run_algebra_suite",
    "solve_component",
    "subsolution_barrier",
    "supersolution_barrier",
    "unclamped_drift",
    "verify_barrier",
    "__version__",
]
