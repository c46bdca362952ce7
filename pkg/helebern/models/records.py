from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

DIAGNOSTIC_COLUMNS: Tuple[str, ...] = (
    "t",
    "dt",
    "vol",
    "cap",
    "J",
    "res_min",
    "res_max",
    "eq_radius",
    "npts",
)

CHECK_COLUMNS: Tuple[str, ...] = ("experiment", "metric", "value", "threshold", "passed")


class FlowStatus(str, Enum):
    REACHED_T_END = "ReachedTEnd"
    STEADY_STATE = "SteadyState"
    SOURCE_COLLISION = "SourceCollision"
    DOMAIN_OVERFLOW = "DomainOverflow"
    SOLVER_FAILURE = "SolverFailure"

    @property
    def is_guard(self) -> bool:
        return self not in (FlowStatus.REACHED_T_END, FlowStatus.STEADY_STATE)


@dataclass(frozen=True)
class Diagnostics:
    """One diagnostics row of a flow.

    ``J`` is vol + lambda * cap. Quantities that need a capacity solve are NaN
    on rows recorded after a guard fired.
    """

    t: float
    dt: float
    vol: float
    cap: float
    J: float
    res_min: float
    res_max: float
    eq_radius: float
    npts: int
    perimeter: float = float("nan")
    J_perimeter: float = float("nan")
    clearance: float = float("nan")

    def to_row(self) -> List[str]:
        values = [getattr(self, name) for name in DIAGNOSTIC_COLUMNS]
        return [str(v) if isinstance(v, int) else f"{v:.17g}" for v in values]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class CheckRecord:
    metric: str
    value: float
    threshold: float
    passed: bool
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentReport:
    name: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckRecord] = field(default_factory=list)
    wall_clock: float = 0.0
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(
        self,
        metric: str,
        value: float,
        threshold: float,
        passed: Optional[bool] = None,
        note: str = "",
    ) -> CheckRecord:
        """Record a check; by default it passes when ``value <= threshold``."""
        ok = bool(value <= threshold) if passed is None else bool(passed)
        record = CheckRecord(metric, float(value), float(threshold), ok, note)
        self.checks.append(record)
        return record

    def extend(self, other: "ExperimentReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(replace(c, metric=prefix + c.metric))
        self.notes.extend(other.notes)

    def to_text(self) -> str:
        lines = [f"name: {self.name}"]
        lines += [f"input.{key}: {value}" for key, value in self.inputs.items()]
        for c in self.checks:
            verdict = "pass" if c.passed else "FAIL"
            lines.append(
                f"check.{c.metric}: {c.value:.17g} (threshold {c.threshold:.17g}) {verdict}"
            )
        lines += [f"note: {n}" for n in self.notes]
        lines.append(f"passed: {str(self.passed).lower()}")
        lines.append(f"wall_clock: {self.wall_clock:.3f}")
        return "\n".join(lines) + "\n"

    def rows(self) -> List[List[str]]:
        return [
            [self.name, c.metric, f"{c.value:.17g}", f"{c.threshold:.17g}", str(c.passed).lower()]
            for c in self.checks
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "inputs": dict(self.inputs),
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
            "wall_clock": self.wall_clock,
        }
