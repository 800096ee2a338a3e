"""Truncated non-resistive MHD on the periodic box with Besov-norm diagnostics."""

from .spectral import DomainError, FourierGrid, GridMismatch, random_field
from .littlewood_paley import BesovIndex, DyadicPartition, besov, besov_norm, build_partition
from .solver import (ConfigError, InvariantViolation, MHDState, NormSeries, SolverConfig,
                     make_initial_data, run)
from .estimates import ConstantsTable, budget_2d, budget_3d, calibrate, load_constants

__all__ = [
    "BesovIndex", "ConfigError", "ConstantsTable", "DomainError", "DyadicPartition", "FourierGrid",
    "GridMismatch", "InvariantViolation", "MHDState", "NormSeries", "SolverConfig", "besov",
    "besov_norm", "budget_2d", "budget_3d", "build_partition", "calibrate", "load_constants",
    "make_initial_data", "random_field", "run",
]
