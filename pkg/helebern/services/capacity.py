"""Dirichlet-Laplace solve on the annular region between the source and the set.

The potential ``u`` solves -Lap u = 0 in Omega minus S with ``u = g0`` on the
source boundary and ``u = 0`` on the moving boundary. The grid discretization is
the Shortley-Weller scheme: axis neighbours across a boundary are replaced by
the boundary value at the cut distance ``theta * h``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..errors import (
    DomainOverflow,
    GridMismatch,
    NoConvergence,
    SolverFailure,
    SourceNotEnclosed,
)
from ..models.grid import GridSpec
from ..models.law import SpeedLaw
from . import kernels
from .contour import ContourPolyline
from .geometry import (
    LevelSetField,
    ScalarField,
    curvature_field,
    interpolate,
    normals_at,
    sdf_ball,
    sdf_ellipse,
    shifted,
    smoothed_heaviside,
)

logger = logging.getLogger("helebern.capacity")

THETA_MIN = 0.05
CLEARANCE_CELLS = 2.0
VALID_EPS = 1e-12


class NodeClass(IntEnum):
    EXTERIOR = 0
    FLUID = 1
    SOURCE = 2


@dataclass(frozen=True)
class SourceSpec:
    """Fixed source set S with a constant Dirichlet datum ``g0`` on its boundary."""

    phi_s: LevelSetField
    g0: float = 1.0

    def __post_init__(self) -> None:
        # g0 = 0 is accepted as a degenerate test input; the solve returns u = 0
        if not np.isfinite(self.g0) or self.g0 < 0:
            raise ValueError("g0 must be a finite nonnegative number")

    @property
    def grid(self) -> GridSpec:
        return self.phi_s.grid

    @classmethod
    def ball(
        cls, center: Sequence[float], radius: float, grid: GridSpec, g0: float = 1.0
    ) -> "SourceSpec":
        return cls(sdf_ball(center, radius, grid), g0)

    @classmethod
    def ellipse(
        cls, center: Sequence[float], axes: Sequence[float], grid: GridSpec, g0: float = 1.0
    ) -> "SourceSpec":
        return cls(sdf_ellipse(center, axes, grid), g0)


class SolverParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-8, gt=0, description="Residual bound relative to g0")
    max_iter: int = Field(default=200_000, gt=0)
    method: Literal["redblack", "bicgstab"] = "redblack"
    check_every: int = Field(default=50, gt=0)


@dataclass(frozen=True)
class DomainMask:
    """Node classes and boundary cuts for one (Omega, S) pair.

    ``theta[k]`` is the cut fraction from a FLUID node towards its neighbour in
    direction ``k`` (ordering -x, +x, -y, +y, -z, +z); it is 1 where the
    neighbour is FLUID. ``cut_value[k]`` holds the Dirichlet value at the cut
    (NaN where there is none). FLUID nodes closer than ``THETA_MIN * h`` to a
    boundary are ``pinned`` to that boundary value.
    """

    grid: GridSpec
    classes: np.ndarray
    theta: np.ndarray
    cut_value: np.ndarray
    pinned: np.ndarray
    pinned_value: np.ndarray
    min_gap: float
    thin_gap: bool

    @property
    def fluid(self) -> np.ndarray:
        return self.classes == NodeClass.FLUID

    @property
    def unknowns(self) -> np.ndarray:
        return self.fluid & ~self.pinned

    @property
    def n_fluid(self) -> int:
        return int(np.count_nonzero(self.fluid))

    def cuts(self) -> np.ndarray:
        return ~np.isnan(self.cut_value)


@dataclass(frozen=True)
class CapacitySolution:
    """Discrete potential on the FLUID nodes (zero elsewhere) plus diagnostics.

    ``u_ext`` additionally carries extrapolated ghost values on the non-FLUID
    axis neighbours of FLUID nodes; ``valid`` marks where ``u_ext`` is defined.
    """

    phi_omega: LevelSetField
    source: SourceSpec
    mask: DomainMask
    u: ScalarField
    u_ext: np.ndarray
    valid: np.ndarray
    residual: float
    iterations: int

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    @property
    def g0(self) -> float:
        return self.source.g0


@dataclass(frozen=True)
class HbarSamples:
    values: np.ndarray
    blocked: np.ndarray

    @property
    def any_blocked(self) -> bool:
        return bool(self.blocked.any())


def _directions(dim: int) -> Tuple[Tuple[int, int], ...]:
    return tuple((axis, step) for axis in range(dim) for step in (-1, 1))


def _flat_offsets(shape: Tuple[int, ...]) -> np.ndarray:
    strides = np.cumprod((1,) + shape[::-1][:-1])[::-1]
    offsets = [step * strides[axis] for axis, step in _directions(len(shape))]
    return np.array(offsets, dtype=np.int64)


# -- classification ------------------------------------------------------------


def classify(phi_omega: LevelSetField, source: SourceSpec) -> DomainMask:
    """Split nodes into FLUID / SOURCE / EXTERIOR and compute boundary cuts."""
    grid = phi_omega.grid
    if grid != source.grid:
        raise GridMismatch("set and source live on different grids")
    h = grid.spacing
    p_om = np.asarray(phi_omega.values)
    p_s = np.asarray(source.phi_s.values)

    uncovered = (p_s <= 0) & (p_om >= -CLEARANCE_CELLS * h)
    if uncovered.any():
        raise SourceNotEnclosed(
            f"{int(uncovered.sum())} source nodes lie within "
            f"{CLEARANCE_CELLS:g}h of the set boundary",
            nodes=int(uncovered.sum()),
        )

    classes = np.full(grid.shape, NodeClass.EXTERIOR, dtype=np.int8)
    classes[p_s <= 0] = NodeClass.SOURCE
    fluid = (p_om < 0) & (p_s > 0)
    classes[fluid] = NodeClass.FLUID

    outer = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        sl = [slice(None)] * grid.dim
        for edge in (0, -1):
            sl[axis] = edge
            outer[tuple(sl)] = True
    if (fluid & outer).any():
        raise DomainOverflow("fluid region touches the grid box")

    dirs = _directions(grid.dim)
    theta = np.ones((len(dirs),) + grid.shape)
    cut_value = np.full((len(dirs),) + grid.shape, np.nan)
    for k, (axis, step) in enumerate(dirs):
        n_om = shifted(p_om, axis, step)
        n_s = shifted(p_s, axis, step)
        n_cls = shifted(classes, axis, step)
        to_ext = fluid & (n_cls == NodeClass.EXTERIOR)
        to_src = fluid & (n_cls == NodeClass.SOURCE)
        with np.errstate(divide="ignore", invalid="ignore"):
            theta[k][to_ext] = (p_om / (p_om - n_om))[to_ext]
            theta[k][to_src] = (p_s / (p_s - n_s))[to_src]
        cut_value[k][to_ext] = 0.0
        cut_value[k][to_src] = source.g0

    cut = ~np.isnan(cut_value)
    near = np.where(cut, theta, np.inf)
    nearest = np.argmin(near, axis=0)
    pinned = fluid & (np.min(near, axis=0) < THETA_MIN)
    pinned_value = np.where(
        pinned, np.take_along_axis(np.nan_to_num(cut_value), nearest[None], axis=0)[0], 0.0
    )
    theta = np.where(cut, np.clip(theta, THETA_MIN, 1.0), 1.0)

    gap = (p_s - p_om)[fluid]
    min_gap = float(gap.min()) if gap.size else float("inf")
    thin_gap = min_gap < CLEARANCE_CELLS * h
    if thin_gap:
        logger.warning("thin gap between source and boundary", extra={"min_gap": min_gap, "h": h})
    return DomainMask(
        grid=grid,
        classes=classes,
        theta=theta,
        cut_value=cut_value,
        pinned=pinned,
        pinned_value=pinned_value,
        min_gap=min_gap,
        thin_gap=thin_gap,
    )


# -- linear system -------------------------------------------------------------


@dataclass
class _System:
    """Shortley-Weller rows of the unknown nodes, scaled by h^2."""

    nodes: np.ndarray
    coef: np.ndarray
    rhs: np.ndarray
    diag: np.ndarray
    offsets: np.ndarray
    shape: Tuple[int, ...]

    def take(self, sel: np.ndarray) -> "_System":
        return _System(
            nodes=np.ascontiguousarray(self.nodes[sel]),
            coef=np.ascontiguousarray(self.coef[:, sel]),
            rhs=np.ascontiguousarray(self.rhs[sel]),
            diag=np.ascontiguousarray(self.diag[sel]),
            offsets=self.offsets,
            shape=self.shape,
        )


def _assemble(mask: DomainMask) -> _System:
    grid = mask.grid
    unknown = mask.unknowns
    nodes = np.flatnonzero(unknown)
    dirs = _directions(grid.dim)
    theta = mask.theta[:, unknown]
    cut_value = mask.cut_value[:, unknown]
    coef = np.zeros((len(dirs), nodes.size))
    rhs = np.zeros(nodes.size)
    for axis in range(grid.dim):
        km, kp = 2 * axis, 2 * axis + 1
        tm, tp = theta[km], theta[kp]
        cm = 2.0 / (tm * (tm + tp))
        cp = 2.0 / (tp * (tm + tp))
        for k, c in ((km, cm), (kp, cp)):
            cut = ~np.isnan(cut_value[k])
            coef[k] = np.where(cut, 0.0, c)
            rhs += np.where(cut, c * np.nan_to_num(cut_value[k]), 0.0)
        if axis == 0:
            diag = cm + cp
        else:
            diag = diag + cm + cp
    return _System(nodes, coef, rhs, diag, _flat_offsets(grid.shape), grid.shape)


def _initial_guess(
    phi_omega: LevelSetField,
    source: SourceSpec,
    mask: DomainMask,
    previous: Optional[CapacitySolution],
) -> np.ndarray:
    fluid = mask.fluid
    inner = -np.asarray(phi_omega.values)
    outer = np.asarray(source.phi_s.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = source.g0 * inner / (inner + outer)
    u = np.where(fluid, np.nan_to_num(guess), 0.0)
    if previous is not None and previous.grid == mask.grid:
        reuse = fluid & previous.mask.fluid
        u = np.where(reuse, previous.u.values, u)
    u = np.where(mask.classes == NodeClass.SOURCE, source.g0, u)
    u = np.where(mask.pinned, mask.pinned_value, u)
    return np.ascontiguousarray(u, dtype=float).ravel()


def _relaxation_factor(phi_omega: LevelSetField, source: SourceSpec, mask: DomainMask) -> float:
    fluid = mask.fluid
    if not fluid.any():
        return 1.0
    depth = np.minimum(-np.asarray(phi_omega.values), np.asarray(source.phi_s.values))[fluid]
    width = 2.0 * float(depth.max()) / mask.grid.spacing
    if width <= 1.0:
        return 1.0
    return float(np.clip(2.0 / (1.0 + np.sin(np.pi / width)), 1.0, 1.99))


def _residual(u: np.ndarray, red: _System, black: _System, g0: float) -> float:
    worst = 0.0
    for part in (red, black):
        if part.nodes.size:
            local = kernels.scaled_residual(
                u, part.nodes, part.coef, part.offsets, part.rhs, part.diag
            )
            worst = max(worst, local)
    return worst / g0


def _solve_redblack(
    u: np.ndarray, system: _System, omega: float, params: SolverParams, g0: float
) -> Tuple[float, int]:
    parity = np.sum(np.unravel_index(system.nodes, system.shape), axis=0) % 2
    red, black = system.take(parity == 0), system.take(parity == 1)
    residual = _residual(u, red, black, g0)
    iterations = 0
    while residual > params.tol and iterations < params.max_iter:
        sweeps = min(params.check_every, params.max_iter - iterations)
        kernels.redblack_sweeps(
            u, red.nodes, black.nodes, red.coef, black.coef, red.offsets,
            red.rhs, black.rhs, red.diag, black.diag, omega, sweeps,
        )
        iterations += sweeps
        updated = _residual(u, red, black, g0)
        if not np.isfinite(updated):
            raise SolverFailure("relaxation produced non-finite values", iterations=iterations)
        if updated > 10.0 * residual and omega > 1.0:
            logger.warning(
                "relaxation diverging, falling back to Gauss-Seidel",
                extra={"omega": omega, "residual": updated, "iterations": iterations},
            )
            omega = 1.0
        residual = updated
    return residual, iterations


def _solve_bicgstab(
    u: np.ndarray, system: _System, params: SolverParams, g0: float
) -> Tuple[float, int]:
    n = system.nodes.size
    index = np.full(u.size, -1, dtype=np.int64)
    index[system.nodes] = np.arange(n)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [np.ones(n)]
    rhs = system.rhs / system.diag
    for k, off in enumerate(system.offsets):
        c = system.coef[k] / system.diag
        active = c != 0.0
        nbr = system.nodes[active] + off
        col = index[nbr]
        unknown = col >= 0
        rows.append(np.flatnonzero(active)[unknown])
        cols.append(col[unknown])
        vals.append(-c[active][unknown])
        # known neighbours (pinned nodes) move to the right-hand side
        known = np.flatnonzero(active)[~unknown]
        np.add.at(rhs, known, c[active][~unknown] * u[nbr[~unknown]])
    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    counter = {"iterations": 0}

    def count(_: np.ndarray) -> None:
        counter["iterations"] += 1

    x, info = splinalg.bicgstab(
        matrix,
        rhs,
        x0=u[system.nodes],
        rtol=0.0,
        atol=params.tol * g0,
        maxiter=params.max_iter,
        callback=count,
    )
    if info < 0:
        raise SolverFailure("bicgstab breakdown", info=int(info))
    u[system.nodes] = x
    residual = float(np.max(np.abs(matrix @ x - rhs))) / g0 if n else 0.0
    return residual, counter["iterations"]


def _ghost_values(u: np.ndarray, mask: DomainMask) -> Tuple[np.ndarray, np.ndarray]:
    """Extrapolate u across each cut so that multilinear sampling stays accurate."""
    fluid = mask.fluid
    total = np.zeros(u.shape)
    count = np.zeros(u.shape)
    for k, (axis, step) in enumerate(_directions(mask.grid.dim)):
        cut = fluid & ~np.isnan(mask.cut_value[k])
        if not cut.any():
            continue
        theta = mask.theta[k]
        g = np.nan_to_num(mask.cut_value[k])
        back = shifted(u, axis, -step)
        back_ok = shifted(fluid, axis, -step)
        quad = (
            (1.0 - theta) / (1.0 + theta) * back
            - 2.0 * (1.0 - theta) / theta * u
            + 2.0 / (theta * (1.0 + theta)) * g
        )
        line = u + (g - u) / theta
        through_pin = back + (g - back) * 2.0 / (1.0 + theta)
        ghost = np.where(
            mask.pinned,
            np.where(back_ok, through_pin, g),
            np.where(back_ok, quad, line),
        )
        # scatter onto the neighbour in direction k
        target = np.zeros(u.shape)
        hits = np.zeros(u.shape)
        src = [slice(None)] * u.ndim
        dst = [slice(None)] * u.ndim
        if step > 0:
            src[axis], dst[axis] = slice(None, -1), slice(1, None)
        else:
            src[axis], dst[axis] = slice(1, None), slice(None, -1)
        target[tuple(dst)] = np.where(cut, ghost, 0.0)[tuple(src)]
        hits[tuple(dst)] = cut[tuple(src)]
        total += target
        count += hits
    valid = fluid | (count > 0)
    u_ext = np.where(fluid, u, np.where(count > 0, total / np.maximum(count, 1.0), 0.0))
    return u_ext, valid


def solve_capacity(
    phi_omega: LevelSetField,
    source: SourceSpec,
    params: Optional[SolverParams] = None,
    previous: Optional[CapacitySolution] = None,
) -> CapacitySolution:
    """Solve the capacity potential; ``previous`` warm-starts the iteration."""
    params = params or SolverParams()
    mask = classify(phi_omega, source)
    grid = mask.grid
    if source.g0 == 0.0:
        zeros = np.zeros(grid.shape)
        return CapacitySolution(
            phi_omega, source, mask, ScalarField(grid, zeros), zeros, mask.fluid, 0.0, 0
        )

    u = _initial_guess(phi_omega, source, mask, previous)
    system = _assemble(mask)
    if params.method == "bicgstab":
        residual, iterations = _solve_bicgstab(u, system, params, source.g0)
    else:
        omega = _relaxation_factor(phi_omega, source, mask)
        residual, iterations = _solve_redblack(u, system, omega, params, source.g0)
    if not np.all(np.isfinite(u)):
        raise SolverFailure("capacity potential is not finite", iterations=iterations)
    if residual > params.tol:
        raise NoConvergence(iterations, residual)

    field = np.where(mask.fluid, np.clip(u.reshape(grid.shape), 0.0, source.g0), 0.0)
    u_ext, valid = _ghost_values(field, mask)
    logger.debug(
        "capacity solved",
        extra={"iterations": iterations, "residual": residual, "fluid_nodes": mask.n_fluid},
    )
    return CapacitySolution(
        phi_omega=phi_omega,
        source=source,
        mask=mask,
        u=ScalarField(grid, field),
        u_ext=u_ext,
        valid=valid,
        residual=residual,
        iterations=iterations,
    )


# -- boundary quantities ------------------------------------------------------


def boundary_hbar_many(sol: CapacitySolution, points: np.ndarray) -> HbarSamples:
    """|Du|^2 at boundary points from a one-sided normal stencil.

    Each point is pushed to the boundary along the interpolated normal; the
    potential is sampled at depths h and 2h below it and fitted by a quadratic
    vanishing on the boundary. Points whose samples leave the FLUID/ghost
    region fall back to a first-order estimate and are flagged ``blocked``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    if sol.g0 == 0.0 or n == 0:
        return HbarSamples(np.zeros(n), np.zeros(n, dtype=bool))
    grid = sol.grid
    h = grid.spacing
    phi = sol.phi_omega
    normals = normals_at(phi, pts)
    delta = -interpolate(np.asarray(phi.values), grid, pts)
    valid = sol.valid.astype(float)

    def sample(depth: float) -> Tuple[np.ndarray, np.ndarray]:
        q = pts - depth * normals
        ok = interpolate(valid, grid, q) >= 1.0 - VALID_EPS
        return interpolate(sol.u_ext, grid, q), ok

    u1, ok1 = sample(h)
    u2, ok2 = sample(2.0 * h)
    uh, okh = sample(0.5 * h)
    s1, s2, sh = delta + h, delta + 2.0 * h, delta + 0.5 * h
    ok1 &= s1 > 0
    ok2 &= ok1 & (s2 > s1)
    okh &= sh > 0

    with np.errstate(divide="ignore", invalid="ignore"):
        quadratic = (u1 * s2**2 - u2 * s1**2) / (s1 * s2 * (s2 - s1))
        slope = np.where(
            ok2, quadratic, np.where(ok1, u1 / s1, np.where(okh, uh / sh, 0.0))
        )
    blocked = ~ok2
    if blocked.any():
        logger.debug("normal stencil blocked", extra={"points": int(blocked.sum())})
    return HbarSamples(values=np.nan_to_num(slope) ** 2, blocked=blocked)


def boundary_hbar(sol: CapacitySolution, x_b: Sequence[float]) -> float:
    return float(boundary_hbar_many(sol, np.asarray(x_b, dtype=float)[None, :]).values[0])


def capacity_integral(sol: CapacitySolution) -> float:
    """Edge-midpoint quadrature of |Du|^2 over the FLUID region.

    A grid edge between FLUID nodes contributes its squared difference quotient;
    an edge cut by a boundary contributes the one-sided quotient towards the cut
    weighted by the fraction ``theta`` of the edge that lies inside.
    """
    grid = sol.grid
    mask = sol.mask
    u = np.asarray(sol.u.values)
    fluid = mask.fluid
    total = 0.0
    for axis in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        lo_t, hi_t = tuple(lo), tuple(hi)
        ui, uj = u[lo_t], u[hi_t]
        fi, fj = fluid[lo_t], fluid[hi_t]
        total += float(np.sum(np.where(fi & fj, (uj - ui) ** 2, 0.0)))
        for node_u, node_f, other_f, k, sl in (
            (ui, fi, fj, 2 * axis + 1, lo_t),
            (uj, fj, fi, 2 * axis, hi_t),
        ):
            cut = node_f & ~other_f
            theta = mask.theta[k][sl]
            g = np.nan_to_num(mask.cut_value[k][sl])
            total += float(np.sum(np.where(cut, (g - node_u) ** 2 / theta, 0.0)))
    return total * grid.spacing ** (grid.dim - 2)


def volume(phi_omega: LevelSetField, source: SourceSpec) -> float:
    """Smoothed measure of Omega minus S (transition width 1.5h)."""
    if phi_omega.grid != source.grid:
        raise GridMismatch("set and source live on different grids")
    h = phi_omega.grid.spacing
    eps = 1.5 * h
    inside = smoothed_heaviside(-np.asarray(phi_omega.values), eps)
    outside_s = smoothed_heaviside(np.asarray(source.phi_s.values), eps)
    return float(np.sum(inside * outside_s) * h**phi_omega.grid.dim)


def _normal_push(contour: ContourPolyline, theta: Optional[np.ndarray]) -> np.ndarray:
    if contour.dim != 2 or len(contour.segments) == 0:
        raise ValueError("boundary integrals need a 2D contour with segments")
    if theta is None:
        return np.ones(len(contour.segments))
    field = np.broadcast_to(np.asarray(theta, dtype=float), (len(contour.segments), 2))
    return np.sum(field * contour.outward_normals(), axis=1)


def hadamard_capacity_derivative(
    sol: CapacitySolution, contour: ContourPolyline, theta: Optional[np.ndarray] = None
) -> float:
    """-integral of |Du|^2 <theta, nu> over the boundary; ``theta`` defaults to nu.

    ``theta`` is a constant vector or one vector per contour segment.
    """
    push = _normal_push(contour, theta)
    hbar = boundary_hbar_many(sol, contour.midpoints()).values
    return float(-np.sum(hbar * push * contour.segment_lengths()))


def hadamard_volume_derivative(
    contour: ContourPolyline, theta: Optional[np.ndarray] = None
) -> float:
    push = _normal_push(contour, theta)
    return float(np.sum(push * contour.segment_lengths()))


def descent_rate(sol: CapacitySolution, contour: ContourPolyline, law: SpeedLaw) -> float:
    """Rate of change of the objective along the flow's own velocity, -integral V^2."""
    _normal_push(contour, None)
    mids = contour.midpoints()
    trace, _ = curvature_field(sol.phi_omega)
    tr_mid = interpolate(trace, sol.grid, mids)
    hbar = boundary_hbar_many(sol, mids).values
    velocity = law.velocity(tr_mid, hbar, sol.grid.dim)
    return float(-np.sum(velocity**2 * contour.segment_lengths()))
