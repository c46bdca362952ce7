"""Closed-form annulus solutions: the reference values for every radial check.

For S = B(0, r0) and Omega = B(0, R) everything is explicit: the potential,
hbar on the outer sphere, capacity, volume, and the radius ODE dR/dt = h(R).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize, special

from ..errors import BadRadii, NoSignChange, SourceCollision
from ..models.law import SpeedLaw

logger = logging.getLogger("helebern.radial_oracle")

COLLISION_MARGIN = 1e-6
BISECT_XTOL = 1e-10
BRACKET_GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class RadialCase:
    N: int
    r0: float
    g0: float
    law: SpeedLaw

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 2:
            raise BadRadii("dimension must be an integer >= 2")
        if not self.r0 > 0:
            raise BadRadii("source radius must be positive")
        if not self.g0 > 0:
            raise BadRadii("g0 must be positive")

    def with_lambda(self, lam: float) -> "RadialCase":
        return RadialCase(self.N, self.r0, self.g0, self.law.with_lambda(lam))


@dataclass(frozen=True)
class RadialFunctionals:
    cap: float
    vol: float
    J_lambda: float
    dcap_dR: float


def sphere_area(N: int) -> float:
    """Area of the unit sphere in R^N, 2 pi^(N/2) / Gamma(N/2)."""
    return float(2.0 * np.pi ** (N / 2.0) / special.gamma(N / 2.0))


def _check_outer(case: RadialCase, R: float) -> None:
    if not R > case.r0:
        raise BadRadii(f"outer radius {R} must exceed source radius {case.r0}")


def _denominator(case: RadialCase, R: float) -> float:
    if case.N == 2:
        return float(np.log(R / case.r0))
    p = 2 - case.N
    return float(case.r0**p - R**p)


def u_radial(case: RadialCase, R: float, r: float) -> float:
    _check_outer(case, R)
    if not case.r0 < r <= R:
        raise BadRadii(f"radius {r} outside ({case.r0}, {R}]")
    if case.N == 2:
        return case.g0 * float(np.log(R / r)) / _denominator(case, R)
    p = 2 - case.N
    return case.g0 * (r**p - R**p) / _denominator(case, R)


def hbar_radial(case: RadialCase, R: float) -> float:
    _check_outer(case, R)
    if case.N == 2:
        slope = case.g0 / (R * _denominator(case, R))
    else:
        slope = case.g0 * (case.N - 2) * R ** (1 - case.N) / _denominator(case, R)
    return float(slope**2)


def velocity_radial(case: RadialCase, R: float) -> float:
    """h on the sphere of radius R: F(-(N-1)/R) + lambda * hbar."""
    _check_outer(case, R)
    trace = -(case.N - 1) / R
    return float(case.law.F(trace, case.N) + case.law.lam * hbar_radial(case, R))


def cap_vol_radial(case: RadialCase, R: float) -> RadialFunctionals:
    _check_outer(case, R)
    area = sphere_area(case.N)
    denom = _denominator(case, R)
    g2 = case.g0**2
    if case.N == 2:
        cap = 2.0 * np.pi * g2 / denom
        dcap = -2.0 * np.pi * g2 / (R * denom**2)
    else:
        scale = g2 * (case.N - 2) * area
        cap = scale / denom
        dcap = -scale * (case.N - 2) * R ** (1 - case.N) / denom**2
    vol = area / case.N * (R**case.N - case.r0**case.N)
    return RadialFunctionals(
        cap=float(cap),
        vol=float(vol),
        J_lambda=float(vol + case.law.lam * cap),
        dcap_dR=float(dcap),
    )


def objective_radial(case: RadialCase, R: float) -> Tuple[float, float]:
    """J(R) = vol + lambda cap and its derivative in R."""
    f = cap_vol_radial(case, R)
    dvol = sphere_area(case.N) * R ** (case.N - 1)
    return f.J_lambda, float(dvol + case.law.lam * f.dcap_dR)


def bernoulli_constant(lam: float) -> float:
    """Boundary value of |Du| at an F = -1 equilibrium."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return float(1.0 / np.sqrt(lam))


def scaling_ratio(case: RadialCase, R: float, rho: float) -> float:
    """hbar(rho R) / (rho^-2 hbar(R)); at least 1 for starshaped sources."""
    return hbar_radial(case, rho * R) / (rho**-2 * hbar_radial(case, R))


def default_bracket(case: RadialCase) -> Tuple[float, float]:
    lo = case.r0 * (1.0 + COLLISION_MARGIN)
    hi = 2.0 * case.r0
    v_lo = velocity_radial(case, lo)
    while np.sign(velocity_radial(case, hi)) == np.sign(v_lo):
        hi *= 2.0
        if hi > BRACKET_GROWTH_LIMIT * case.r0:
            raise NoSignChange("velocity keeps its sign on (r0, 1e6 r0]")
    return lo, hi


def steady_radius(case: RadialCase, bracket: Optional[Tuple[float, float]] = None) -> float:
    """Root of the radial velocity by bisection."""
    lo, hi = bracket if bracket is not None else default_bracket(case)
    v_lo, v_hi = velocity_radial(case, lo), velocity_radial(case, hi)
    if v_lo == 0.0:
        return float(lo)
    if v_hi == 0.0:
        return float(hi)
    if np.sign(v_lo) == np.sign(v_hi):
        raise NoSignChange(f"velocity has the same sign at {lo} and {hi}")
    root = optimize.bisect(
        lambda r: velocity_radial(case, r),
        lo,
        hi,
        xtol=BISECT_XTOL,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )
    logger.debug("steady radius", extra={"lambda": case.law.lam, "radius": root})
    return float(root)


def integrate_radius(
    case: RadialCase, R_init: float, t_end: float, dt: float
) -> List[Tuple[float, float]]:
    """Classical RK4 for dR/dt = h(R); ``round(t_end / dt)`` fixed steps."""
    _check_outer(case, R_init)
    if not (t_end >= 0 and dt > 0):
        raise ValueError("t_end must be nonnegative and dt positive")
    floor = case.r0 * (1.0 + COLLISION_MARGIN)
    n = int(round(t_end / dt))
    R = float(R_init)
    trajectory = [(0.0, R)]

    def rate(r: float) -> float:
        if r <= floor:
            raise SourceCollision(
                f"radius {r:.6g} reached the source", trajectory=list(trajectory)
            )
        return velocity_radial(case, r)

    for k in range(n):
        k1 = rate(R)
        k2 = rate(R + 0.5 * dt * k1)
        k3 = rate(R + 0.5 * dt * k2)
        k4 = rate(R + dt * k3)
        R = R + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if R <= floor:
            trajectory.append(((k + 1) * dt, R))
            raise SourceCollision(f"radius {R:.6g} reached the source", trajectory=trajectory)
        trajectory.append(((k + 1) * dt, R))
    return trajectory


def radius_at(trajectory: List[Tuple[float, float]], t: float) -> float:
    times = np.array([p[0] for p in trajectory])
    radii = np.array([p[1] for p in trajectory])
    return float(np.interp(t, times, radii))
