"""Exception hierarchy for helebern.

Every error carries a human readable ``detail`` and an ``exit_code`` that the
CLI maps straight to the process exit status.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class HelebernError(Exception):
    """Base class for all helebern errors."""

    exit_code: int = 3

    def __init__(self, detail: str, **context: Any) -> None:
        super().__init__(detail)
        self.detail = detail
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "detail": self.detail,
            "exit_code": self.exit_code,
            **self.context,
        }


# -- configuration / preconditions (exit 2) ---------------------------------


class ConfigError(HelebernError):
    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None, **context: Any) -> None:
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail, line=line, **context)
        self.line = line


class UnknownKey(ConfigError):
    pass


class MissingKey(ConfigError):
    pass


class BadValue(ConfigError):
    pass


class ConfigMismatch(HelebernError):
    exit_code = 2


class PreconditionError(HelebernError):
    exit_code = 2


# -- geometry ----------------------------------------------------------------


class GeometryError(HelebernError):
    pass


class BallOutsideGrid(GeometryError):
    pass


class NoInterface(GeometryError):
    pass


class GridMismatch(GeometryError):
    pass


class DegenerateGradient(GeometryError):
    pass


# -- capacity ----------------------------------------------------------------


class CapacityError(HelebernError):
    pass


class SourceNotEnclosed(CapacityError):
    pass


class NoConvergence(CapacityError):
    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(
            f"capacity solve did not converge after {iterations} sweeps "
            f"(residual {residual:.3e})",
            iterations=iterations,
            residual=residual,
        )
        self.iterations = iterations
        self.residual = residual


class SolverFailure(CapacityError):
    pass


# -- flow guards -------------------------------------------------------------


class FlowGuard(HelebernError):
    pass


class SourceCollision(FlowGuard):
    def __init__(self, detail: str, trajectory: Any = None, **context: Any) -> None:
        super().__init__(detail, **context)
        self.trajectory = trajectory


class DomainOverflow(FlowGuard):
    pass


# -- radial oracle -----------------------------------------------------------


class OracleError(HelebernError):
    pass


class BadRadii(OracleError):
    pass


class NoSignChange(OracleError):
    pass
