import math

import numpy as np
import pytest

from helebern.errors import ConfigMismatch, PreconditionError
from helebern.models.grid import GridSpec
from helebern.models.law import SpeedLaw
from helebern.services import radial_oracle
from helebern.services.capacity import SourceSpec
from helebern.services.evolve import FlowConfig
from helebern.services.geometry import sdf_ball, sdf_ellipse
from helebern.services.harness import (
    centered_grid,
    descent_experiment,
    inclusion_experiment,
    lambda_sweep,
    lemma_suite,
    uniqueness_experiment,
)

E = math.e


def _flow(
    law: SpeedLaw,
    start: float = 1.6,
    grid: GridSpec = None,
    t_end: float = 0.1,
    **kw,
) -> FlowConfig:
    grid = grid or GridSpec.from_bounds(-4.0, 4.0, 64)
    return FlowConfig(
        grid=grid,
        source=SourceSpec.ball((0.0, 0.0), 1.0, grid),
        initial=sdf_ball((0.0, 0.0), start, grid),
        law=law,
        t_end=t_end,
        **kw,
    )


def test_centered_grid_puts_nodes_on_the_axes():
    grid = centered_grid(0.25, 2.1)

    assert grid.spacing == pytest.approx(0.25)
    assert grid.origin == pytest.approx((-2.25, -2.25))
    assert grid.shape == (19, 19)
    assert grid.nearest_node((0.0, 0.0)) == (9, 9)


def test_empty_lemma_suite_passes():
    report = lemma_suite([])

    assert report.passed
    assert report.checks == []


def test_unknown_lemma_check_is_rejected():
    with pytest.raises(PreconditionError):
        lemma_suite([0.1], checks=["decay", "sideways"])


def test_scaling_check_on_coarse_grid():
    report = lemma_suite([1.0 / 16.0], checks=["scaling", "monotonicity"])
    metrics = {c.metric: c for c in report.checks}

    assert metrics["h0.0625.scaling_rho0.8"].passed
    assert metrics["h0.0625.scaling_rho0.9"].passed
    assert np.isfinite(metrics["h0.0625.monotonicity"].value)
    assert report.wall_clock > 0.0


def test_inclusion_rejects_different_grids():
    a = _flow(SpeedLaw.constant(-1.0, 1.0))
    b = _flow(SpeedLaw.constant(-1.0, 2.0), grid=GridSpec.from_bounds(-4.0, 4.0, 80))
    with pytest.raises(ConfigMismatch):
        inclusion_experiment(a, b)


def test_inclusion_rejects_different_curvature_parts():
    a = _flow(SpeedLaw.constant(-1.0, 1.0))
    b = _flow(SpeedLaw.mean_curvature(1.0, 2.0))
    with pytest.raises(ConfigMismatch):
        inclusion_experiment(a, b)


def test_inclusion_needs_ordered_lambdas_and_nested_sets():
    with pytest.raises(PreconditionError):
        inclusion_experiment(
            _flow(SpeedLaw.constant(-1.0, 2.0)), _flow(SpeedLaw.constant(-1.0, 1.0), start=2.0)
        )
    with pytest.raises(PreconditionError):
        inclusion_experiment(
            _flow(SpeedLaw.constant(-1.0, 1.0)), _flow(SpeedLaw.constant(-1.0, 2.0))
        )


def test_identical_flows_have_zero_inclusion_defect():
    cfg = _flow(SpeedLaw.constant(-1.0, 1.0), t_end=0.05)
    report = inclusion_experiment(cfg, cfg, strict=False)
    defect = {c.metric: c for c in report.checks}["max_inclusion_defect"]

    assert defect.value == 0.0
    assert report.passed


def test_descent_needs_a_supported_law():
    with pytest.raises(PreconditionError):
        descent_experiment(_flow(SpeedLaw.affine(1.0, -1.0, 1.0)))


def test_descent_of_short_run():
    report = descent_experiment(_flow(SpeedLaw.mean_curvature(1.0), start=2.0, t_end=0.2))

    assert report.inputs["objective"] == "J_perimeter"
    assert report.inputs["status"] == "ReachedTEnd"
    assert report.checks


def test_uniqueness_needs_a_shrinking_or_curvature_law():
    initials = [sdf_ball((0.0, 0.0), 1.6, GridSpec.from_bounds(-4.0, 4.0, 64))]
    for law in (SpeedLaw.affine(1.0, -1.0, 1.0), SpeedLaw.constant(1.0, 1.0)):
        with pytest.raises(PreconditionError):
            uniqueness_experiment(_flow(law), initials)


def test_uniqueness_needs_unit_source_datum():
    grid = GridSpec.from_bounds(-4.0, 4.0, 64)
    base = FlowConfig(
        grid=grid,
        source=SourceSpec.ball((0.0, 0.0), 1.0, grid, g0=2.0),
        initial=sdf_ball((0.0, 0.0), 1.6, grid),
        law=SpeedLaw.constant(-1.0, 1.0),
        t_end=0.1,
    )
    with pytest.raises(PreconditionError) as exc:
        uniqueness_experiment(base, [base.initial])
    assert "g0 = 1" in str(exc.value)


def test_lambda_sweep_validates_lambdas():
    cfg = _flow(SpeedLaw.constant(-1.0, 1.0))
    with pytest.raises(PreconditionError):
        lambda_sweep(cfg, [1.0, 1.0])
    with pytest.raises(PreconditionError):
        lambda_sweep(cfg, [0.0, 1.0])


@pytest.mark.slow
def test_full_lemma_suite():
    assert lemma_suite([1.0 / 32.0, 1.0 / 64.0]).passed


@pytest.mark.slow
def test_ordered_lambdas_keep_sets_nested():
    grid = GridSpec.from_bounds(-4.0, 4.0, 512)
    first = _flow(SpeedLaw.constant(-1.0, 6.0), start=1.5, grid=grid, t_end=2.0)
    second = _flow(SpeedLaw.constant(-1.0, 8.0), start=2.0, grid=grid, t_end=2.0)
    report = inclusion_experiment(first, second)

    assert report.inputs["eps"] == pytest.approx(2.0 * grid.h)
    assert report.passed


@pytest.mark.slow
def test_objective_decreases_from_an_elliptical_start():
    grid = GridSpec.from_bounds(-4.0, 4.0, 256)
    cfg = FlowConfig(
        grid=grid,
        source=SourceSpec.ball((0.0, 0.0), 1.0, grid),
        initial=sdf_ellipse((0.0, 0.0), (2.5, 1.6), grid),
        law=SpeedLaw.constant(-1.0, 4.0),
        t_end=10.0,
    )
    report = descent_experiment(cfg, slack=1e-3, min_decrease=0.05)

    assert report.passed
    assert report.inputs["total_relative_decrease"] >= 0.05


@pytest.mark.slow
def test_elliptical_source_has_one_steady_set():
    grid = GridSpec.from_bounds(-4.0, 4.0, 256)
    base = FlowConfig(
        grid=grid,
        source=SourceSpec.ellipse((0.0, 0.0), (1.3, 0.8), grid),
        initial=sdf_ball((0.0, 0.0), 1.8, grid),
        law=SpeedLaw.constant(-1.0, 4.0),
        t_end=30.0,
    )
    initials = [sdf_ball((0.0, 0.0), r, grid) for r in (1.8, 3.5)]
    report = uniqueness_experiment(base, initials)

    assert report.passed
    assert report.inputs["run0.radius_spread"] > grid.h
    assert report.inputs["run1.radius_spread"] > grid.h


@pytest.mark.slow
def test_sweep_matches_oracle_radii():
    grid = centered_grid(1.0 / 32.0, 5.5)
    base = _flow(SpeedLaw.constant(-1.0, 1.0), start=2.0, grid=grid, t_end=30.0)
    case = radial_oracle.RadialCase(2, 1.0, 1.0, base.law)

    assert lambda_sweep(base, [0.1, 1.0, E, E**2], case).passed


@pytest.mark.slow
def test_different_starts_settle_on_one_steady_set():
    grid = centered_grid(1.0 / 32.0, 5.5)
    base = _flow(SpeedLaw.constant(-1.0, E**2), start=2.0, grid=grid, t_end=30.0)
    initials = [sdf_ball((0.0, 0.0), r, grid) for r in (1.5, 4.0)]

    assert uniqueness_experiment(base, initials).passed
