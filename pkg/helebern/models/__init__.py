from .grid import GridSpec
from .law import SpeedLaw
from .records import CheckRecord, Diagnostics, ExperimentReport, FlowStatus

__all__ = ["CheckRecord", "Diagnostics", "ExperimentReport", "FlowStatus", "GridSpec", "SpeedLaw"]
