"""Carleman linearization of polynomial ODEs with a classical linear-system back end."""

from .diagnostics import DiagnosticsReport, compute_R2, compute_Rk, compute_Rk0, diagnose
from .engine import CarlemanSystem, assemble_truncated, transfer_matrix
from .errors import (
    BlowUpError,
    CapacityError,
    CarlemanError,
    ConvergenceError,
    DimensionError,
    DissipationError,
    ResidualError,
    SingularMatrixError,
    SpecError,
    ZeroNormError,
)
from .polyode import PolynomialODE, Trajectory, direct_integrate, load_ode_spec, save_ode_spec
from .quadratize import QuadraticODE, equivalence_check, quadratize
from .solver import CarlemanSolution, assemble_block, euler_integrate, rk4_integrate, solve_block
from .tensor_core import SparseMatrix, kron, kron_power_vec, spectral_norm

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "CapacityError",
    "CarlemanError",
    "CarlemanSolution",
    "CarlemanSystem",
    "ConvergenceError",
    "DiagnosticsReport",
    "DimensionError",
    "DissipationError",
    "PolynomialODE",
    "QuadraticODE",
    "ResidualError",
    "SingularMatrixError",
    "SparseMatrix",
    "SpecError",
    "Trajectory",
    "ZeroNormError",
    "assemble_block",
    "assemble_truncated",
    "compute_R2",
    "compute_Rk",
    "compute_Rk0",
    "diagnose",
    "direct_integrate",
    "equivalence_check",
    "euler_integrate",
    "kron",
    "kron_power_vec",
    "load_ode_spec",
    "quadratize",
    "rk4_integrate",
    "save_ode_spec",
    "solve_block",
    "spectral_norm",
    "transfer_matrix",
]
