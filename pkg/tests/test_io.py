import math

import numpy as np
import pytest

from helebern.models.grid import GridSpec
from helebern.models.records import DIAGNOSTIC_COLUMNS, Diagnostics, ExperimentReport
from helebern.services import io
from helebern.services.contour import extract_contour, hausdorff_distance
from helebern.services.geometry import sdf_ball


def _diagnostics(t: float, npts: int = 120) -> Diagnostics:
    return Diagnostics(
        t=t,
        dt=0.01,
        vol=math.pi,
        cap=9.0,
        J=math.pi + 9.0,
        res_min=-1.0,
        res_max=0.5,
        eq_radius=1.5,
        npts=npts,
    )


def test_field_dump_keeps_values_and_mask(tmp_path):
    grid = GridSpec.from_bounds(-1.0, 1.0, 16)
    phi = sdf_ball((0.1, 0.0), 0.5, grid)
    mask = (np.asarray(phi.values) < 0).astype(np.int8)

    path = io.write_field(tmp_path / "field.txt", phi, mask)
    lines = path.read_text().splitlines()
    dump = io.read_field(path)

    assert lines[0] == "2 17 17"
    assert lines[2] == "0.125"
    assert len(lines) == 3 + 2 * grid.size
    assert dump.field.grid == grid
    assert np.array_equal(dump.field.values, phi.values)
    assert np.array_equal(dump.mask, mask)


def test_field_dump_without_mask(tmp_path):
    grid = GridSpec.from_bounds(-1.0, 1.0, 16)
    dump = io.read_field(io.write_field(tmp_path / "field.txt", sdf_ball((0.0, 0.0), 0.5, grid)))

    assert dump.mask is None


def test_truncated_field_is_rejected(tmp_path):
    grid = GridSpec.from_bounds(-1.0, 1.0, 16)
    path = io.write_field(tmp_path / "field.txt", sdf_ball((0.0, 0.0), 0.5, grid))
    path.write_text("\n".join(path.read_text().splitlines()[:-3]) + "\n")

    with pytest.raises(ValueError):
        io.read_field(path)


def test_mask_shape_must_match(tmp_path):
    grid = GridSpec.from_bounds(-1.0, 1.0, 16)
    with pytest.raises(ValueError):
        io.write_field(tmp_path / "f.txt", sdf_ball((0.0, 0.0), 0.5, grid), np.zeros((3, 3)))


def test_contour_file(tmp_path):
    grid = GridSpec.from_bounds(-3.0, 3.0, 96)
    contour = extract_contour(sdf_ball((0.0, 0.0), 1.5, grid))

    path = io.write_contour(tmp_path / "contour.csv", contour)
    again = io.read_contour(path)

    assert path.read_text().splitlines()[0] == "loop_id,x,y"
    assert again.closed == (True,)
    assert hausdorff_distance(contour, again) == 0.0


def test_diagnostics_file(tmp_path):
    rows = [_diagnostics(0.0), _diagnostics(0.1)]
    path = io.write_diagnostics(tmp_path / "diagnostics.csv", rows)
    rows = io.read_diagnostics(path)

    assert path.read_text().splitlines()[0] == ",".join(DIAGNOSTIC_COLUMNS)
    assert len(rows) == 2
    assert rows[1]["t"] == 0.1
    assert rows[0]["npts"] == 120
    assert isinstance(rows[0]["npts"], int)


def test_report_checks_default_to_upper_bounds():
    report = ExperimentReport("sample")
    report.add("small", 0.5, 1.0)
    report.add("edge", 1.0, 1.0)
    assert report.passed

    report.add("ranged", 2.0, 1.5, passed=False, note="range [0.5, 1.5]")
    assert not report.passed
    assert [c.passed for c in report.checks] == [True, True, False]


def test_report_extend_prefixes_metrics():
    inner = ExperimentReport("inner", notes=["skipped"])
    inner.add("x", 1.0, 2.0)
    outer = ExperimentReport("outer")
    outer.extend(inner, "lemma.")

    assert outer.checks[0].metric == "lemma.x"
    assert outer.notes == ["skipped"]


def test_report_files(tmp_path):
    report = ExperimentReport("sample", inputs={"h": 0.125})
    report.add("gap", 3.0, 1.0)
    report.wall_clock = 0.25

    text, table = io.write_report(tmp_path, report)
    lines = text.read_text().splitlines()

    assert text.name == "sample.txt"
    assert "input.h: 0.125" in lines
    assert lines[-2] == "passed: false"
    assert lines[-1] == "wall_clock: 0.250"
    assert table.read_text().splitlines() == [
        "experiment,metric,value,threshold,passed",
        "sample,gap,3,1,false",
    ]
