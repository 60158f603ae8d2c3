"""Jost matrices, bound states and Buslaev-Faddeev trace identities for
matrix Schrodinger operators on the half line."""

from . import bc, errors, laurent, potential, series, solve, spectrum, trace
from .bc import BoundaryPair, DiagonalBC, reduce_to_diagonal, transform_problem, validate_boundary
from .potential import PotentialModel, Profile, decay_report, evaluate
from .series import CoeffTables, b_table, c_table, coefficient_tables, d_table, e_table, m_remainder_check
from .solve import SolverConfig, det_jost, jost_matrix, jost_solution, regular_solution, wronskian_drift
from .spectrum import (SpectrumResult, compute_spectrum, det_on_imaginary_axis, fd_oracle_spectrum,
                       find_eigenvalues, half_bound_count)
from .trace import LogHProfile, TraceReport, full_report, h_value, identity_residual, log_h_profile

__version__ = "0.1.0"

__all__ = [
    "bc", "errors", "laurent", "potential", "series", "solve", "spectrum", "trace",
    "BoundaryPair", "DiagonalBC", "reduce_to_diagonal", "transform_problem", "validate_boundary",
    "PotentialModel", "Profile", "decay_report", "evaluate",
    "CoeffTables", "b_table", "c_table", "coefficient_tables", "d_table", "e_table", "m_remainder_check",
    "SolverConfig", "det_jost", "jost_matrix", "jost_solution", "regular_solution", "wronskian_drift",
    "SpectrumResult", "compute_spectrum", "det_on_imaginary_axis", "fd_oracle_spectrum",
    "find_eigenvalues", "half_bound_count",
    "LogHProfile", "TraceReport", "full_report", "h_value", "identity_residual", "log_h_profile",
]
