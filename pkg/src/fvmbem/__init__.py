"""Vertex-centred finite volume / boundary element coupling for parabolic-elliptic
interface problems in 2D."""

from .bem import Boundary, assemble_bem, evaluate_exterior, growth_factor, v_energy_norm
from .coupling import CoupledSystem, assemble_fembem_oracle, assemble_load, assemble_system
from .errors import ConvergenceReport, ExactSolution, compute_eoc, error_flux, error_H_T
from .fvm import CoefficientSet, UpwindScheme, assemble_fvm, assemble_fvm_upwind
from .mesh import (build_dual, build_lshape_mesh, build_uniform_square_mesh,
                   classify_boundary, refine_uniform)
from .problems import ProblemSpec, get_problem
from .time_integrators import TimeGrid, TrajectorySolution, run

__all__ = [
    "Boundary", "assemble_bem", "evaluate_exterior", "growth_factor", "v_energy_norm",
    "CoupledSystem", "assemble_fembem_oracle", "assemble_load", "assemble_system",
    "ConvergenceReport", "ExactSolution", "compute_eoc", "error_flux", "error_H_T",
    "CoefficientSet", "UpwindScheme", "assemble_fvm", "assemble_fvm_upwind",
    "build_dual", "build_lshape_mesh", "build_uniform_square_mesh", "classify_boundary",
    "refine_uniform", "ProblemSpec", "get_problem", "TimeGrid", "TrajectorySolution", "run",
]
