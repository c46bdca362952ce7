"""Public API for the helebern package."""

from .errors import HelebernError
from .models.config import RunConfig, parse_config
from .models.grid import GridSpec
from .models.law import SpeedLaw
from .services.capacity import SolverParams, SourceSpec, solve_capacity
from .services.evolve import FlowConfig, FlowOutcome, run
from .services.geometry import LevelSetField, sdf_ball, sdf_ellipse

__version__ = "0.1.0"

__all__ = [
    "FlowConfig",
    "FlowOutcome",
    "GridSpec",
    "HelebernError",
    "LevelSetField",
    "RunConfig",
    "SolverParams",
    "SourceSpec",
    "SpeedLaw",
    "parse_config",
    "run",
    "sdf_ball",
    "sdf_ellipse",
    "solve_capacity",
]
