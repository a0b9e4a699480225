"""Spectral toolkit for the cubic Klein-Gordon equation on a periodic 2D box."""

from .errors import ConfigError, GridError, ResolutionWarning, SnapshotError
from .grid import ComplexField2D, Field, Grid2D, RealField2D
from .ground_state import GroundStateProfile, ground_state, solve_ground_state
from .kg import KGState, Trajectory, evolve, strang_step
from .nls import NLSState, NLSTrajectory, nls_evolve, nls_step

__version__ = "0.1.0"

__all__ = [
    "ComplexField2D",
    "ConfigError",
    "Field",
    "Grid2D",
    "GridError",
    "GroundStateProfile",
    "KGState",
    "NLSState",
    "NLSTrajectory",
    "RealField2D",
    "ResolutionWarning",
    "SnapshotError",
    "Trajectory",
    "evolve",
    "ground_state",
    "nls_evolve",
    "nls_step",
    "solve_ground_state",
    "strang_step",
]
