import numpy as np
import pytest

from helebern.errors import NoInterface
from helebern.models.grid import GridSpec
from helebern.services.contour import (
    contour_length,
    enclosed_area,
    equivalent_radius,
    extract_contour,
    hausdorff_distance,
)
from helebern.services.geometry import ScalarField, sdf_ball, sdf_ellipse, union


def _circle(radius: float, center=(0.0, 0.0), cells: int = 128):
    grid = GridSpec.from_bounds(-3.0, 3.0, cells)
    return extract_contour(sdf_ball(center, radius, grid))


def test_circle_vertices_lie_on_the_circle():
    grid = GridSpec.from_bounds(-2.0, 2.0, 256)
    contour = extract_contour(sdf_ball((0.0, 0.0), 1.0, grid))
    radii = np.linalg.norm(contour.vertices, axis=1)

    assert np.max(np.abs(radii - 1.0)) <= 1e-3
    assert contour.n_loops == 1
    assert contour.closed == (True,)
    assert len(contour.segments) == len(contour)


def test_loops_run_counterclockwise_with_outward_normals():
    contour = _circle(1.5)

    assert enclosed_area(contour) == pytest.approx(np.pi * 1.5**2, rel=2e-3)
    outward = np.sum(contour.outward_normals() * contour.midpoints(), axis=1)
    assert np.all(outward > 0)


def test_two_disjoint_balls_give_two_closed_loops():
    grid = GridSpec.from_bounds(-3.0, 3.0, 96)
    both = union(sdf_ball((-1.5, 0.0), 1.0, grid), sdf_ball((1.5, 0.0), 1.0, grid))
    contour = extract_contour(both)

    assert contour.n_loops == 2
    assert contour.closed == (True, True)
    for loop_id in range(2):
        centre = contour.loop(loop_id).mean(axis=0)
        assert abs(abs(centre[0]) - 1.5) < 0.01


def test_annulus_boundary_orients_the_hole_clockwise():
    grid = GridSpec.from_bounds(-3.0, 3.0, 96)
    r = np.hypot(*grid.mesh())
    ring = ScalarField(grid, np.maximum(r - 2.0, 1.0 - r))
    contour = extract_contour(ring)

    assert contour.n_loops == 2
    assert enclosed_area(contour) == pytest.approx(np.pi * 3.0, rel=0.01)


def test_hausdorff_distance():
    a = _circle(1.0)

    assert hausdorff_distance(a, a) == 0.0
    assert hausdorff_distance(a, _circle(1.5)) == pytest.approx(0.5, abs=0.01)
    assert hausdorff_distance(a, _circle(1.0, center=(0.2, 0.0))) == pytest.approx(0.2, abs=0.01)


def test_hausdorff_distance_is_a_metric_on_sampled_triples():
    contours = [
        _circle(1.0),
        _circle(1.3, center=(0.0, 0.25)),
        _circle(1.0, center=(0.2, 0.0)),
        _circle(0.8, center=(-0.1, 0.3)),
    ]

    for a in contours:
        for b in contours:
            assert hausdorff_distance(a, b) == hausdorff_distance(b, a)
            for c in contours:
                assert hausdorff_distance(a, c) <= (
                    hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12
                )


@pytest.mark.parametrize("shape", ["ball", "ellipse"])
def test_vertices_are_zeros_of_the_interpolated_field(shape):
    grid = GridSpec.from_bounds(-3.0, 3.0, 96)
    if shape == "ball":
        phi = sdf_ball((0.1, -0.2), 1.7, grid)
    else:
        phi = sdf_ellipse((0.0, 0.0), (2.5, 1.6), grid)
    contour = extract_contour(phi)

    residual = np.abs(phi.sample(contour.vertices))
    assert np.max(residual) <= 1e-12 * np.max(np.abs(phi.values))


def test_contour_length_and_equivalent_radius():
    grid = GridSpec.from_bounds(-3.0, 3.0, 128)
    phi = sdf_ball((0.0, 0.0), 1.5, grid)
    contour = extract_contour(phi)

    assert contour_length(contour) == pytest.approx(3.0 * np.pi, rel=0.005)
    assert equivalent_radius(phi, contour) == pytest.approx(1.5, abs=grid.h**2)


def test_three_dimensional_contour_is_a_vertex_cloud():
    grid = GridSpec.from_bounds(-2.0, 2.0, 32, dim=3)
    phi = sdf_ball((0.0, 0.0, 0.0), 1.0, grid)
    contour = extract_contour(phi)

    assert contour.dim == 3
    assert len(contour.segments) == 0
    assert np.max(np.abs(np.linalg.norm(contour.vertices, axis=1) - 1.0)) <= 0.01
    assert equivalent_radius(phi) == pytest.approx(1.0, rel=0.02)
    assert hausdorff_distance(contour, contour) == 0.0


def test_no_crossing_raises():
    grid = GridSpec.from_bounds(-1.0, 1.0, 32)
    with pytest.raises(NoInterface):
        extract_contour(ScalarField(grid, np.ones(grid.shape)))
