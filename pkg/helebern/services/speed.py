"""Normal velocity h = F(nu, H) + lambda * hbar on the narrow band."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..models.law import SpeedLaw
from .capacity import CapacitySolution, boundary_hbar_many
from .geometry import LevelSetField, ScalarField, foot_points

logger = logging.getLogger("helebern.speed")

DEFAULT_SAFETY = 0.5
DEFAULT_DT_CAP = 1e-3


@dataclass(frozen=True)
class SpeedField:
    """Advective part ``c + lambda * hbar_ext`` on the band and the curvature weight."""

    advective: ScalarField
    parabolic_coeff: float
    valid_band: float
    band: np.ndarray
    blocked: int = 0

    def __post_init__(self) -> None:
        if self.parabolic_coeff < 0:
            raise ValueError("parabolic coefficient must be nonnegative")

    @property
    def max_advective(self) -> float:
        values = np.asarray(self.advective.values)[self.band]
        return float(np.max(np.abs(values))) if values.size else 0.0


def eval_F(
    law: SpeedLaw, trace_h, dim: int = 2, normal: Optional[Sequence[float]] = None
):
    """Curvature part F(nu, H) of the velocity.

    ``normal`` is accepted for anisotropic laws; none of the built-in laws use it.
    """
    return law.F(trace_h, dim)


def extend_hbar(phi: LevelSetField, sol: CapacitySolution) -> ScalarField:
    """Band values of hbar, constant along normals (closest-point extension)."""
    field, _ = _extend(phi, sol)
    return field


def _extend(phi: LevelSetField, sol: CapacitySolution):
    band = phi.band()
    feet, degenerate = foot_points(phi, band)
    samples = boundary_hbar_many(sol, feet)
    values = np.zeros(phi.grid.shape)
    values[band] = samples.values
    blocked = int(np.count_nonzero(samples.blocked))
    if blocked or degenerate.any():
        logger.debug(
            "hbar extension flags",
            extra={"blocked": blocked, "degenerate": int(np.count_nonzero(degenerate))},
        )
    return ScalarField(phi.grid, values), blocked


def build_speed_field(
    phi: LevelSetField, law: SpeedLaw, sol: Optional[CapacitySolution] = None
) -> SpeedField:
    """Split h into its advective and parabolic parts on the band of ``phi``.

    The capacity term is only extended when ``law.lam > 0``.
    """
    band = phi.band()
    advective = np.where(band, law.constant_part, 0.0)
    blocked = 0
    if law.lam > 0:
        if sol is None:
            raise ValueError("a capacity solution is required when lambda > 0")
        hbar, blocked = _extend(phi, sol)
        advective = advective + law.lam * np.asarray(hbar.values)
    return SpeedField(
        advective=ScalarField(phi.grid, advective),
        parabolic_coeff=law.curvature_weight,
        valid_band=phi.band_width,
        band=band,
        blocked=blocked,
    )


def cfl_dt(
    field: SpeedField,
    h: float,
    safety: float = DEFAULT_SAFETY,
    dt_cap: float = DEFAULT_DT_CAP,
) -> float:
    """Explicit stable step: safety * min(h / (N max|adv|), h^2 / (4 N a))."""
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    dim = field.advective.grid.dim
    vmax = field.max_advective
    advective_bound = h / (dim * vmax) if vmax > 0 else np.inf
    a = field.parabolic_coeff
    parabolic_bound = h * h / (4.0 * dim * a) if a > 0 else np.inf
    if np.isinf(advective_bound) and np.isinf(parabolic_bound):
        logger.debug("zero speed, using dt cap", extra={"dt_cap": dt_cap})
        return float(dt_cap)
    return float(safety * min(advective_bound, parabolic_bound))
