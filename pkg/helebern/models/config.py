"""Flat ``key = value`` run configuration.

Parsing happens in two passes: :func:`parse_config` tokenizes the text, rejects
unknown or duplicate keys and checks required keys with their line numbers, then
:class:`RunConfig` validates the values. Pydantic validation errors are reported
as :class:`~helebern.errors.BadValue` on the line of the offending key, and so
are source or initial shapes whose boundary misses the grid box.
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import BadValue, GeometryError, MissingKey, PreconditionError, UnknownKey
from ..services.capacity import SolverParams, SourceSpec
from ..services.evolve import FlowConfig
from ..services.geometry import LevelSetField, sdf_ball, sdf_ellipse
from ..services.radial_oracle import RadialCase
from .grid import GridSpec
from .law import SpeedLaw

Vector = Tuple[float, ...]

REQUIRED_KEYS = ("dim", "grid.min", "grid.max", "grid.n", "law.f", "lambda")


class RunConfig(BaseModel):
    """Validated run configuration; field aliases are the config-file keys."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    dim: int = Field(..., alias="dim")
    grid_min: Vector = Field(..., alias="grid.min")
    grid_max: Vector = Field(..., alias="grid.max")
    grid_n: int = Field(..., alias="grid.n", ge=15, description="Cells per axis")

    source_kind: Literal["ball", "ellipse"] = Field(default="ball", alias="source.kind")
    source_center: Optional[Vector] = Field(default=None, alias="source.center")
    source_radius: Optional[float] = Field(default=None, alias="source.radius", gt=0)
    source_axes: Optional[Vector] = Field(default=None, alias="source.axes")
    g0: float = Field(default=1.0, alias="g0", gt=0)

    init_kind: Literal["ball", "ellipse"] = Field(default="ball", alias="init.kind")
    init_center: Optional[Vector] = Field(default=None, alias="init.center")
    init_radius: Optional[float] = Field(default=None, alias="init.radius", gt=0)
    init_axes: Optional[Vector] = Field(default=None, alias="init.axes")

    law_f: Literal["constant", "mean_curvature", "affine"] = Field(..., alias="law.f")
    law_c: Optional[float] = Field(default=None, alias="law.c")
    law_a: Optional[float] = Field(default=None, alias="law.a", ge=0)
    lam: float = Field(..., alias="lambda", ge=0)

    t_end: float = Field(default=10.0, alias="t_end", gt=0)
    cfl_safety: float = Field(default=0.5, alias="cfl.safety", gt=0, le=1)
    dt_cap: float = Field(default=1e-3, alias="dt.cap", gt=0)
    reinit_every: int = Field(default=5, alias="reinit.every", ge=1)
    diag_every: int = Field(default=10, alias="diag.every", ge=1)
    steady_res_tol: Optional[float] = Field(default=None, alias="steady.res_tol", gt=0)
    steady_disp_tol: Optional[float] = Field(default=None, alias="steady.disp_tol", gt=0)
    steady_span: float = Field(default=1.0, alias="steady.span", ge=0)

    solver_tol: float = Field(default=1e-8, alias="solver.tol", gt=0)
    solver_max_iter: int = Field(default=200_000, alias="solver.max_iter", gt=0)
    solver_method: Literal["redblack", "bicgstab"] = Field(
        default="redblack", alias="solver.method"
    )

    out_dir: str = Field(default="out", alias="out.dir", min_length=1)
    out_contours: bool = Field(default=True, alias="out.contours")
    out_fields: bool = Field(default=True, alias="out.fields")
    out_mask: bool = Field(default=False, alias="out.mask")

    sweep_lambdas: Optional[Vector] = Field(default=None, alias="sweep.lambdas")
    oracle_dt: float = Field(default=1e-3, alias="oracle.dt", gt=0)
    suite_h: Optional[Vector] = Field(default=None, alias="suite.h")
    descent_slack: float = Field(default=1e-3, alias="descent.slack", ge=0)
    compare_eps: Optional[float] = Field(default=None, alias="compare.eps", gt=0)
    uniqueness_tol: Optional[float] = Field(default=None, alias="uniqueness.tol", gt=0)

    @field_validator(
        "grid_min",
        "grid_max",
        "source_center",
        "source_axes",
        "init_center",
        "init_axes",
        "sweep_lambdas",
        "suite_h",
        mode="before",
    )
    @classmethod
    def split_vector(cls, v: Any) -> Any:
        if isinstance(v, str):
            parts = [p.strip() for p in v.split(",")]
            if any(not p for p in parts):
                raise ValueError("empty entry in comma separated list")
            return tuple(parts)
        if isinstance(v, (int, float)):
            return (v,)
        return v

    @field_validator("dim")
    @classmethod
    def supported_dim(cls, v: int) -> int:
        if v not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        return v

    @field_validator("source_axes", "init_axes", "suite_h")
    @classmethod
    def positive_entries(cls, v: Optional[Vector]) -> Optional[Vector]:
        if v is not None and any(x <= 0 for x in v):
            raise ValueError("entries must be positive")
        return v

    @model_validator(mode="after")
    def consistent(self) -> "RunConfig":
        for name in ("grid_min", "grid_max"):
            if len(getattr(self, name)) not in (1, self.dim):
                raise ValueError(f"{name.replace('_', '.')} needs 1 or {self.dim} entries")
        for name in ("source_center", "init_center", "source_axes", "init_axes"):
            value = getattr(self, name)
            if value is not None and len(value) != self.dim:
                raise ValueError(f"{name.replace('_', '.')} needs {self.dim} entries")
        try:
            self.grid()
            self.law()
        except ValidationError as exc:
            raise ValueError(exc.errors()[0]["msg"]) from None
        return self

    # -- builders -----------------------------------------------------------

    def _bounds(self, values: Vector) -> Tuple[float, ...]:
        return values * self.dim if len(values) == 1 else values

    def grid(self) -> GridSpec:
        return GridSpec.from_bounds(
            self._bounds(self.grid_min), self._bounds(self.grid_max), self.grid_n, self.dim
        )

    def law(self) -> SpeedLaw:
        c = self.law_c or 0.0
        a = self.law_a or 0.0
        if self.law_f == "constant":
            return SpeedLaw.constant(c, self.lam)
        if self.law_f == "mean_curvature":
            return SpeedLaw.mean_curvature(a, self.lam)
        return SpeedLaw.affine(a, c, self.lam)

    def solver(self) -> SolverParams:
        return SolverParams(
            tol=self.solver_tol, max_iter=self.solver_max_iter, method=self.solver_method
        )

    def _center(self, value: Optional[Vector]) -> Vector:
        return value if value is not None else (0.0,) * self.dim

    def source(self) -> SourceSpec:
        grid = self.grid()
        center = self._center(self.source_center)
        if self.source_kind == "ball":
            return SourceSpec.ball(center, self.source_radius, grid, self.g0)
        return SourceSpec.ellipse(center, self.source_axes, grid, self.g0)

    def initial(self) -> LevelSetField:
        grid = self.grid()
        center = self._center(self.init_center)
        if self.init_kind == "ball":
            return sdf_ball(center, self.init_radius, grid)
        return sdf_ellipse(center, self.init_axes, grid)

    def flow_config(self) -> FlowConfig:
        return FlowConfig(
            grid=self.grid(),
            source=self.source(),
            initial=self.initial(),
            law=self.law(),
            t_end=self.t_end,
            reinit_every=self.reinit_every,
            steady_res_tol=self.steady_res_tol,
            steady_disp_tol=self.steady_disp_tol,
            steady_span=self.steady_span,
            diag_every=self.diag_every,
            solver=self.solver(),
            cfl_safety=self.cfl_safety,
            dt_cap=self.dt_cap,
        )

    def is_radial(self) -> bool:
        origin = (0.0,) * self.dim
        return (
            self.source_kind == "ball"
            and self.init_kind == "ball"
            and self._center(self.source_center) == origin
            and self._center(self.init_center) == origin
        )

    def radial_case(self) -> RadialCase:
        if not self.is_radial():
            raise PreconditionError("radial oracle needs concentric balls centred at the origin")
        return RadialCase(self.dim, self.source_radius, self.g0, self.law())

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        """Canonical text form of the keys that were set; parses back to an equal config."""
        lines = []
        for name, info in type(self).model_fields.items():
            if name not in self.model_fields_set:
                continue
            lines.append(f"{info.alias} = {_format_value(getattr(self, name))}")
        return "\n".join(lines) + "\n"


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _field_aliases() -> Dict[str, str]:
    return {info.alias or name: name for name, info in RunConfig.model_fields.items()}


KNOWN_KEYS = tuple(_field_aliases())


def _tokenize(text: str) -> Tuple[Dict[str, str], Dict[str, int]]:
    entries: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise BadValue("missing key before '='", line=lineno)
        if key not in KNOWN_KEYS:
            raise UnknownKey(f"unknown key '{key}'", line=lineno, key=key)
        if key in entries:
            raise BadValue(f"duplicate key '{key}' (first set on line {lines[key]})", line=lineno)
        if not value:
            raise BadValue(f"empty value for '{key}'", line=lineno)
        entries[key] = value
        lines[key] = lineno
    return entries, lines


def _check_required(entries: Dict[str, str]) -> None:
    missing: List[str] = [key for key in REQUIRED_KEYS if key not in entries]
    for prefix in ("source", "init"):
        kind = entries.get(f"{prefix}.kind", "ball")
        needed = f"{prefix}.radius" if kind == "ball" else f"{prefix}.axes"
        if needed not in entries:
            missing.append(needed)
    law = entries.get("law.f")
    if law in ("constant", "affine") and "law.c" not in entries:
        missing.append("law.c")
    if law in ("mean_curvature", "affine") and "law.a" not in entries:
        missing.append("law.a")
    if missing:
        raise MissingKey(f"missing required key(s): {', '.join(missing)}", keys=missing)


def _geometry_key(cfg: RunConfig, prefix: str) -> str:
    """Config key of a shape that misses the grid box: its centre if outside, else its size."""
    center = getattr(cfg, f"{prefix}_center")
    grid = cfg.grid()
    if center is not None and any(
        not lo <= c <= hi for c, lo, hi in zip(center, grid.origin, grid.upper)
    ):
        return f"{prefix}.center"
    return f"{prefix}.radius" if getattr(cfg, f"{prefix}_kind") == "ball" else f"{prefix}.axes"


def _check_geometry(cfg: RunConfig, lines: Dict[str, int]) -> None:
    for prefix, build in (("source", cfg.source), ("init", cfg.initial)):
        try:
            build()
        except GeometryError as exc:
            key = _geometry_key(cfg, prefix)
            raise BadValue(f"{key}: {exc.detail}", line=lines.get(key)) from exc


def parse_config(text: str) -> RunConfig:
    entries, lines = _tokenize(text)
    _check_required(entries)
    try:
        cfg = RunConfig.model_validate(entries)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else None
        where = f"{key}: " if key else ""
        raise BadValue(f"{where}{err['msg']}", line=lines.get(key) if key else None) from exc
    _check_geometry(cfg, lines)
    return cfg
