"""Batch non-holonomic trajectory optimization and multi-modal highway MPC."""

from .basis import (
    BasisSet,
    BoundarySpec,
    ConstantMatrices,
    TimeGrid,
    build_basis,
    build_constant_matrices,
    build_time_grid,
)
from .solver import AmState, BatchSolver, KktSystem, ProblemBatch, Residuals, SolveInfo

__all__ = [
    "AmState",
    "BasisSet",
    "BatchSolver",
    "BoundarySpec",
    "ConstantMatrices",
    "KktSystem",
    "ProblemBatch",
    "Residuals",
    "SolveInfo",
    "TimeGrid",
    "build_basis",
    "build_constant_matrices",
    "build_time_grid",
]

__version__ = "0.1.0"
