import math

import numpy as np
import pytest

from helebern.errors import DomainOverflow, GridMismatch, NoConvergence, SourceNotEnclosed
from helebern.models.grid import GridSpec
from helebern.models.law import SpeedLaw
from helebern.services.capacity import (
    THETA_MIN,
    NodeClass,
    SolverParams,
    SourceSpec,
    boundary_hbar,
    capacity_integral,
    classify,
    descent_rate,
    hadamard_capacity_derivative,
    hadamard_volume_derivative,
    solve_capacity,
    volume,
)
from helebern.services.contour import extract_contour
from helebern.services.geometry import sdf_ball, sdf_ellipse, union

HBAR_R2 = 1.0 / (2.0 * math.log(2.0)) ** 2
CAP_R2 = 2.0 * math.pi / math.log(2.0)
DCAP_R2 = -2.0 * math.pi / (2.0 * math.log(2.0) ** 2)


def _annulus(cells: int, R: float = 2.0, r0: float = 1.0, g0: float = 1.0, half: float = 2.5, **kw):
    grid = GridSpec.from_bounds(-half, half, cells)
    phi = sdf_ball((0.0, 0.0), R, grid)
    source = SourceSpec.ball((0.0, 0.0), r0, grid, g0)
    return solve_capacity(phi, source, SolverParams(**kw))


@pytest.fixture(scope="module")
def fine():
    """S = B(0,1), Omega = B(0,2), g0 = 1 at h = 1/64."""
    return _annulus(320)


def test_classify_annulus():
    grid = GridSpec.from_bounds(-2.5, 2.5, 160)
    mask = classify(sdf_ball((0.0, 0.0), 2.0, grid), SourceSpec.ball((0.0, 0.0), 1.0, grid))

    r = np.hypot(*grid.mesh())
    assert np.all((r[mask.fluid] > 1.0) & (r[mask.fluid] < 2.0))
    assert np.all(mask.classes[r <= 1.0] == NodeClass.SOURCE)
    assert np.all(mask.theta >= THETA_MIN)
    assert not mask.thin_gap


def test_classify_rejects_source_close_to_boundary():
    grid = GridSpec.from_bounds(-2.5, 2.5, 160)
    with pytest.raises(SourceNotEnclosed):
        classify(sdf_ball((0.0, 0.0), 1.05, grid), SourceSpec.ball((0.0, 0.0), 1.0, grid))


def test_classify_rejects_set_touching_the_box():
    grid = GridSpec.from_bounds(-2.5, 2.5, 80)
    with pytest.raises(DomainOverflow):
        classify(sdf_ball((0.0, 0.0), 2.6, grid), SourceSpec.ball((0.0, 0.0), 1.0, grid))


def test_classify_rejects_mismatched_grids():
    grid = GridSpec.from_bounds(-2.5, 2.5, 80)
    other = GridSpec.from_bounds(-2.5, 2.5, 64)
    with pytest.raises(GridMismatch):
        classify(sdf_ball((0.0, 0.0), 2.0, grid), SourceSpec.ball((0.0, 0.0), 1.0, other))


def test_fluid_count_matches_ellipse_annulus_area():
    grid = GridSpec.from_bounds(-3.0, 3.0, 192)
    phi = sdf_ellipse((0.0, 0.0), (2.5, 1.6), grid)
    source = SourceSpec.ball((0.0, 0.0), 1.0, grid)
    mask = classify(phi, source)
    exact = math.pi * 2.5 * 1.6 - math.pi

    assert mask.n_fluid * grid.h**2 == pytest.approx(exact, rel=0.02)
    assert volume(phi, source) == pytest.approx(mask.n_fluid * grid.h**2, rel=0.02)


def test_radial_potential(fine):
    u = fine.u.sample(np.array([[1.5, 0.0], [0.0, -1.5]]))

    assert u == pytest.approx([math.log(2.0 / 1.5) / math.log(2.0)] * 2, abs=5e-3)
    assert fine.residual <= 1e-8
    assert fine.u.values.min() >= 0.0
    assert fine.u.values.max() <= 1.0


def test_radial_hbar_and_capacity(fine):
    assert boundary_hbar(fine, (2.0, 0.0)) == pytest.approx(HBAR_R2, rel=0.03)
    diagonal = (-math.sqrt(2.0), math.sqrt(2.0))
    assert boundary_hbar(fine, diagonal) == pytest.approx(HBAR_R2, rel=0.03)
    assert capacity_integral(fine) == pytest.approx(CAP_R2, rel=0.05)


def test_hadamard_derivatives(fine):
    contour = extract_contour(fine.phi_omega)

    assert hadamard_capacity_derivative(fine, contour) == pytest.approx(DCAP_R2, rel=0.03)
    assert hadamard_volume_derivative(contour) == pytest.approx(4.0 * math.pi, rel=0.01)
    # a rigid translation changes neither functional to first order
    shift = hadamard_capacity_derivative(fine, contour, np.array([1.0, 0.0]))
    assert abs(shift) <= 0.02 * abs(DCAP_R2)


def test_descent_rate_is_nonpositive(fine):
    contour = extract_contour(fine.phi_omega)
    rate = descent_rate(fine, contour, SpeedLaw.constant(-1.0, 4.0))

    assert rate < 0.0


def test_capacity_scales_with_g0_squared():
    one = _annulus(160)
    two = _annulus(160, g0=2.0)

    assert np.max(np.abs(two.u.values - 2.0 * one.u.values)) <= 1e-5
    assert capacity_integral(two) == pytest.approx(4.0 * capacity_integral(one), rel=1e-4)


def test_zero_datum_gives_zero_potential():
    sol = _annulus(160, g0=0.0)

    assert not sol.u.values.any()
    assert capacity_integral(sol) == 0.0
    assert boundary_hbar(sol, (2.0, 0.0)) == 0.0


def test_component_without_source_carries_no_potential():
    grid = GridSpec.from_bounds(-5.0, 5.0, 160)
    phi = union(sdf_ball((0.0, 0.0), 2.0, grid), sdf_ball((3.6, 0.0), 0.8, grid))
    sol = solve_capacity(phi, SourceSpec.ball((0.0, 0.0), 1.0, grid))
    detached = sdf_ball((3.6, 0.0), 0.8, grid).values < 0

    assert np.max(np.abs(sol.u.values[detached])) <= 1e-5
    assert boundary_hbar(sol, (4.4, 0.0)) <= 1e-8
    assert boundary_hbar(sol, (-2.0, 0.0)) > 0.1


def test_bicgstab_agrees_with_relaxation():
    relax = _annulus(160)
    krylov = _annulus(160, method="bicgstab")

    assert np.max(np.abs(relax.u.values - krylov.u.values)) <= 1e-5


def test_warm_start_reuses_previous_solution():
    grid = GridSpec.from_bounds(-2.5, 2.5, 160)
    source = SourceSpec.ball((0.0, 0.0), 1.0, grid)
    first = solve_capacity(sdf_ball((0.0, 0.0), 2.0, grid), source)
    again = solve_capacity(sdf_ball((0.0, 0.0), 2.0, grid), source, previous=first)

    assert again.iterations <= first.iterations
    assert np.max(np.abs(again.u.values - first.u.values)) <= 1e-5


def test_iteration_cap_raises_no_convergence():
    with pytest.raises(NoConvergence) as exc:
        _annulus(160, max_iter=1)
    assert exc.value.iterations == 1
    assert exc.value.exit_code == 3


def test_annulus_volume():
    grid = GridSpec.from_bounds(-5.0, 5.0, 320)
    inner = volume(sdf_ball((0.0, 0.0), 2.0, grid), SourceSpec.ball((0.0, 0.0), 1.0, grid))
    outer = volume(sdf_ball((0.0, 0.0), 4.0, grid), SourceSpec.ball((0.0, 0.0), 2.0, grid))
    same = volume(sdf_ball((0.0, 0.0), 1.0, grid), SourceSpec.ball((0.0, 0.0), 1.0, grid))

    assert inner == pytest.approx(3.0 * math.pi, rel=0.01)
    assert outer == pytest.approx(4.0 * inner, rel=0.01)
    assert same <= 2.0 * math.pi * 1.5 * grid.h


@pytest.mark.slow
def test_radial_accuracy_at_fine_spacing():
    sol = _annulus(640)

    assert boundary_hbar(sol, (2.0, 0.0)) == pytest.approx(HBAR_R2, rel=0.02)
    assert capacity_integral(sol) == pytest.approx(CAP_R2, rel=0.02)


@pytest.mark.slow
def test_boundary_hbar_converges_under_refinement(fine):
    coarse = abs(boundary_hbar(fine, (2.0, 0.0)) - HBAR_R2)
    refined = abs(boundary_hbar(_annulus(640), (2.0, 0.0)) - HBAR_R2)

    assert refined <= coarse / 3.0


@pytest.mark.slow
def test_hadamard_matches_finite_difference_of_capacity():
    delta = 0.05
    plus = capacity_integral(_annulus(320, R=2.0 + delta))
    minus = capacity_integral(_annulus(320, R=2.0 - delta))
    centred = (plus - minus) / (2.0 * delta)
    sol = _annulus(320)
    boundary = hadamard_capacity_derivative(sol, extract_contour(sol.phi_omega))

    assert boundary == pytest.approx(centred, rel=0.03)


@pytest.mark.slow
def test_spherical_shell():
    grid = GridSpec.from_bounds(-2.5, 2.5, 120, dim=3)
    sol = solve_capacity(
        sdf_ball((0.0, 0.0, 0.0), 2.0, grid), SourceSpec.ball((0.0, 0.0, 0.0), 1.0, grid)
    )

    assert boundary_hbar(sol, (2.0, 0.0, 0.0)) == pytest.approx(0.25, rel=0.03)
    assert capacity_integral(sol) == pytest.approx(8.0 * math.pi, rel=0.03)
