"""Explicit level-set time stepping under h = F(nu, H) + lambda * hbar."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..errors import (
    CapacityError,
    DomainOverflow,
    GeometryError,
    PreconditionError,
    SolverFailure,
    SourceCollision,
    SourceNotEnclosed,
)
from ..models.grid import GridSpec
from ..models.law import SpeedLaw
from ..models.records import Diagnostics, FlowStatus
from .capacity import (
    CapacitySolution,
    SolverParams,
    SourceSpec,
    boundary_hbar_many,
    capacity_integral,
    classify,
    solve_capacity,
    volume,
)
from .contour import (
    ContourPolyline,
    contour_length,
    equivalent_radius,
    extract_contour,
    hausdorff_distance,
)
from .geometry import (
    DELTA_GRAD,
    LevelSetField,
    curvature_field,
    curvature_terms,
    interpolate,
    reinitialize,
    shifted,
)
from .speed import DEFAULT_DT_CAP, DEFAULT_SAFETY, SpeedField, build_speed_field, cfl_dt

logger = logging.getLogger("helebern.evolve")

COLLISION_CELLS = 2.0
START_CLEARANCE_CELLS = 4.0
OVERFLOW_LAYERS = 4
STEADY_WINDOW = 20
STEADY_SPAN = 1.0


@dataclass(frozen=True)
class FlowConfig:
    grid: GridSpec
    source: SourceSpec
    initial: LevelSetField
    law: SpeedLaw
    t_end: float
    reinit_every: int = 5
    steady_res_tol: Optional[float] = None
    steady_disp_tol: Optional[float] = None
    diag_every: int = 10
    solver: SolverParams = field(default_factory=SolverParams)
    cfl_safety: float = DEFAULT_SAFETY
    dt_cap: float = DEFAULT_DT_CAP
    steady_window: int = STEADY_WINDOW
    steady_span: float = STEADY_SPAN

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise PreconditionError("t_end must be positive")
        if self.initial.grid != self.grid or self.source.grid != self.grid:
            raise PreconditionError("initial set, source and grid must agree")
        if self.reinit_every < 1 or self.diag_every < 1 or self.steady_window < 2:
            raise PreconditionError("step cadences must be positive")
        if self.steady_span < 0:
            raise PreconditionError("steady_span must be nonnegative")
        clearance = source_clearance(self.initial, self.source)
        if clearance < START_CLEARANCE_CELLS * self.grid.spacing:
            raise PreconditionError(
                f"initial set must contain the source with clearance "
                f">= {START_CLEARANCE_CELLS:g}h (got {clearance:.4g})"
            )

    @property
    def disp_tol(self) -> float:
        if self.steady_disp_tol is not None:
            return self.steady_disp_tol
        return 0.5 * self.grid.spacing


@dataclass(frozen=True)
class FlowSnapshot:
    t: float
    phi: LevelSetField
    diagnostics: Diagnostics
    contour: ContourPolyline


@dataclass(frozen=True)
class FlowOutcome:
    status: FlowStatus
    final: FlowSnapshot
    trajectory: Tuple[FlowSnapshot, ...]
    steps: int
    detail: str = ""

    def raise_for_status(self) -> None:
        """Raise the guard error matching a guard status."""
        if self.status is FlowStatus.SOURCE_COLLISION:
            raise SourceCollision(self.detail or "source collision", trajectory=self.trajectory)
        if self.status is FlowStatus.DOMAIN_OVERFLOW:
            raise DomainOverflow(self.detail or "domain overflow")
        if self.status is FlowStatus.SOLVER_FAILURE:
            raise SolverFailure(self.detail or "solver failure")

    def diagnostics(self) -> List[Diagnostics]:
        return [snap.diagnostics for snap in self.trajectory]


# -- guards --------------------------------------------------------------------


def source_clearance(phi: LevelSetField, source: SourceSpec) -> float:
    """Smallest distance from a source node to the boundary of the set."""
    inside_s = np.asarray(source.phi_s.values) <= 0
    if not inside_s.any():
        return float("inf")
    return float(np.min(-np.asarray(phi.values)[inside_s]))


def touches_box(phi: LevelSetField, layers: int = OVERFLOW_LAYERS) -> bool:
    values = np.asarray(phi.values)
    inner = tuple(slice(layers, n - layers) for n in values.shape)
    shell = np.ones(values.shape, dtype=bool)
    shell[inner] = False
    return bool(np.any(values[shell] <= 0))


# -- one step ------------------------------------------------------------------


def godunov_norm(values: np.ndarray, h: float, speed: np.ndarray) -> np.ndarray:
    """Upwind |Dphi| for phi_t + speed |Dphi| = 0."""
    ahead = np.zeros_like(values)
    behind = np.zeros_like(values)
    for axis in range(values.ndim):
        d_minus = (values - shifted(values, axis, -1)) / h
        d_plus = (shifted(values, axis, 1) - values) / h
        ahead += np.maximum(np.maximum(d_minus, 0.0) ** 2, np.minimum(d_plus, 0.0) ** 2)
        behind += np.maximum(np.minimum(d_minus, 0.0) ** 2, np.maximum(d_plus, 0.0) ** 2)
    return np.sqrt(np.where(speed > 0, ahead, behind))


def advance(phi: LevelSetField, speed: SpeedField, law: SpeedLaw, dt: float) -> np.ndarray:
    """Forward Euler update of the band values; far-field values stay put."""
    values = np.asarray(phi.values)
    h = phi.grid.spacing
    adv = np.asarray(speed.advective.values)
    update = -dt * adv * godunov_norm(values, h, adv)
    if speed.parabolic_coeff > 0:
        kappa, norm, degenerate = curvature_terms(phi)
        # a / (N - 1) * div(Dphi/|Dphi|) |Dphi|
        curv = np.where(degenerate, 0.0, kappa * np.maximum(norm, DELTA_GRAD))
        update += dt * speed.parabolic_coeff / (phi.grid.dim - 1) * curv
    return np.where(speed.band, values + update, values)


def boundary_residual_stats(
    phi: LevelSetField,
    law: SpeedLaw,
    source: SourceSpec,
    params: Optional[SolverParams] = None,
    sol: Optional[CapacitySolution] = None,
    contour: Optional[ContourPolyline] = None,
) -> Tuple[float, float]:
    """Extrema of h = F + lambda * hbar over the contour vertices."""
    if sol is None:
        classify(phi, source)
        if law.lam > 0:
            sol = solve_capacity(phi, source, params)
    contour = contour if contour is not None else extract_contour(phi)
    values = _boundary_velocity(phi, law, contour, sol)
    return float(values.min()), float(values.max())


def _boundary_velocity(
    phi: LevelSetField,
    law: SpeedLaw,
    contour: ContourPolyline,
    sol: Optional[CapacitySolution],
) -> np.ndarray:
    trace, _ = curvature_field(phi)
    tr = interpolate(trace, phi.grid, contour.vertices)
    hbar = np.zeros(len(contour))
    if law.lam > 0 and sol is not None:
        hbar = boundary_hbar_many(sol, contour.vertices).values
    return np.asarray(law.velocity(tr, hbar, phi.grid.dim), dtype=float)


def _diagnostics(
    t: float,
    dt: float,
    phi: LevelSetField,
    law: SpeedLaw,
    source: SourceSpec,
    sol: Optional[CapacitySolution],
    contour: ContourPolyline,
) -> Diagnostics:
    vol = volume(phi, source)
    nan = float("nan")
    cap = capacity_integral(sol) if sol is not None else nan
    perimeter = contour_length(contour) if phi.grid.dim == 2 else nan
    if sol is not None:
        res = _boundary_velocity(phi, law, contour, sol)
        res_min, res_max = float(res.min()), float(res.max())
    else:
        res_min = res_max = nan
    return Diagnostics(
        t=t,
        dt=dt,
        vol=vol,
        cap=cap,
        J=vol + law.lam * cap if law.lam > 0 else vol,
        res_min=res_min,
        res_max=res_max,
        eq_radius=equivalent_radius(phi, contour),
        npts=len(contour),
        perimeter=perimeter,
        J_perimeter=perimeter + law.lam * cap if law.lam > 0 else perimeter,
        clearance=source_clearance(phi, source),
    )


def step(
    phi: LevelSetField,
    law: SpeedLaw,
    source: SourceSpec,
    params: Optional[SolverParams] = None,
    dt: Optional[float] = None,
    safety: float = DEFAULT_SAFETY,
    dt_cap: float = DEFAULT_DT_CAP,
    previous: Optional[CapacitySolution] = None,
) -> Tuple[LevelSetField, Diagnostics]:
    """Advance ``phi`` by one step; diagnostics describe the state before the step.

    ``dt`` defaults to the CFL bound of the current velocity.
    """
    try:
        sol = solve_capacity(phi, source, params, previous=previous)
    except CapacityError as exc:
        if isinstance(exc, (SolverFailure, SourceNotEnclosed)):
            raise
        raise SolverFailure(str(exc)) from exc
    speed = build_speed_field(phi, law, sol)
    dt = cfl_dt(speed, phi.grid.spacing, safety, dt_cap) if dt is None else dt
    contour = extract_contour(phi)
    diag = _diagnostics(0.0, dt, phi, law, source, sol, contour)
    values = advance(phi, speed, law, dt)
    if not np.all(np.isfinite(values)):
        raise SolverFailure("level set became non-finite")
    return phi.with_values(values), diag


# -- driver --------------------------------------------------------------------


def _steady_res_tol(config: FlowConfig, sol: Optional[CapacitySolution], contour) -> float:
    if config.steady_res_tol is not None:
        return config.steady_res_tol
    c = config.law.constant_part
    if c != 0:
        return 0.05 * abs(c)
    if config.law.lam > 0 and sol is not None:
        hbar = boundary_hbar_many(sol, contour.vertices).values
        return 0.05 * config.law.lam * float(np.median(hbar))
    return 0.0


def run(
    config: FlowConfig,
    on_snapshot: Optional[Callable[[FlowSnapshot], None]] = None,
) -> FlowOutcome:
    """Evolve ``config.initial`` until t_end, a steady state, or a guard."""
    law, source, grid = config.law, config.source, config.grid
    h = grid.spacing
    phi = config.initial
    t = 0.0
    steps = 0
    dt = 0.0
    sol: Optional[CapacitySolution] = None
    trajectory: List[FlowSnapshot] = []
    status: Optional[FlowStatus] = None
    detail = ""

    def record(sol_now: Optional[CapacitySolution], dt_now: float) -> FlowSnapshot:
        contour = extract_contour(phi)
        diag = _diagnostics(t, dt_now, phi, law, source, sol_now, contour)
        snap = FlowSnapshot(t, phi, diag, contour)
        trajectory.append(snap)
        if on_snapshot is not None:
            on_snapshot(snap)
        return snap

    while status is None:
        clearance = source_clearance(phi, source)
        if clearance <= COLLISION_CELLS * h:
            record(None, dt)
            status = FlowStatus.SOURCE_COLLISION
            detail = f"clearance {clearance:.4g} <= {COLLISION_CELLS:g}h at t={t:.6g}"
            break
        if touches_box(phi):
            record(None, dt)
            status = FlowStatus.DOMAIN_OVERFLOW
            detail = f"interface within {OVERFLOW_LAYERS} cells of the grid box at t={t:.6g}"
            break

        at_end = t >= config.t_end * (1.0 - 1e-12)
        want_diag = steps % config.diag_every == 0 or at_end
        try:
            if law.lam > 0 or want_diag:
                sol = solve_capacity(phi, source, config.solver, previous=sol)
        except CapacityError as exc:
            record(None, dt)
            status = FlowStatus.SOLVER_FAILURE
            detail = exc.detail
            break

        speed = build_speed_field(phi, law, sol)
        if not at_end:
            dt = min(cfl_dt(speed, h, config.cfl_safety, config.dt_cap), config.t_end - t)

        if want_diag:
            snap = record(sol, dt)
            logger.info(
                "flow snapshot",
                extra={"t": t, "dt": dt, "eq_radius": snap.diagnostics.eq_radius, "steps": steps},
            )
            if _is_steady(config, trajectory, sol):
                status = FlowStatus.STEADY_STATE
                break
        if at_end:
            status = FlowStatus.REACHED_T_END
            break

        values = advance(phi, speed, law, dt)
        if not np.all(np.isfinite(values)):
            status = FlowStatus.SOLVER_FAILURE
            detail = f"level set became non-finite at t={t:.6g}"
            break
        steps += 1
        t += dt
        try:
            phi = phi.with_values(values)
            if steps % config.reinit_every == 0:
                phi = reinitialize(phi)
        except GeometryError as exc:
            status = FlowStatus.SOLVER_FAILURE
            detail = exc.detail
            break

    if not trajectory:
        record(sol, dt)
    log = logger.warning if status.is_guard else logger.info
    log("flow finished", extra={"status": status.value, "t": t, "steps": steps, "detail": detail})
    return FlowOutcome(status, trajectory[-1], tuple(trajectory), steps, detail)


def _is_steady(
    config: FlowConfig, trajectory: List[FlowSnapshot], sol: Optional[CapacitySolution]
) -> bool:
    last = trajectory[-1]
    res = max(abs(last.diagnostics.res_min), abs(last.diagnostics.res_max))
    if np.isfinite(res) and res <= _steady_res_tol(config, sol, last.contour):
        return True
    # the reference contour is at least steady_window rows and steady_span time units back
    window = config.steady_window
    if len(trajectory) < window:
        return False
    horizon = last.t - config.steady_span
    earlier = [s for s in trajectory[: len(trajectory) - window + 1] if s.t <= horizon]
    if not earlier:
        return False
    return hausdorff_distance(earlier[-1].contour, last.contour) <= config.disp_tol
