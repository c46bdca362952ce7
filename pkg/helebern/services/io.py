"""Text formats for fields, contours, diagnostics and experiment reports.

Field snapshot::

    dim nx ny [nz]
    origin_x origin_y [origin_z]
    h
    <one value per line, C order with axis 0 = x, %.17g>
    [<one mask code per line when a mask is dumped>]
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from ..models.grid import GridSpec
from ..models.records import CHECK_COLUMNS, DIAGNOSTIC_COLUMNS, Diagnostics, ExperimentReport
from .contour import ContourPolyline
from .geometry import ScalarField

logger = logging.getLogger("helebern.io")

PathLike = Union[str, Path]


@dataclass(frozen=True)
class FieldDump:
    field: ScalarField
    mask: Optional[np.ndarray] = None


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_field(path: PathLike, field: ScalarField, mask: Optional[np.ndarray] = None) -> Path:
    grid = field.grid
    path = Path(path)
    lines = [
        " ".join([str(grid.dim)] + [str(n) for n in grid.shape]),
        " ".join(_fmt(o) for o in grid.origin),
        _fmt(grid.spacing),
    ]
    lines.extend(_fmt(v) for v in np.asarray(field.values).ravel())
    if mask is not None:
        if mask.shape != grid.shape:
            raise ValueError("mask shape does not match the field")
        lines.extend(str(int(c)) for c in np.asarray(mask).ravel())
    path.write_text("\n".join(lines) + "\n")
    logger.debug("field written", extra={"path": str(path), "nodes": grid.size})
    return path


def read_field(path: PathLike) -> FieldDump:
    lines = Path(path).read_text().split()
    # header is whitespace separated as well, so parse positionally
    dim = int(lines[0])
    shape = tuple(int(n) for n in lines[1 : 1 + dim])
    origin = tuple(float(o) for o in lines[1 + dim : 1 + 2 * dim])
    spacing = float(lines[1 + 2 * dim])
    body = lines[2 + 2 * dim :]
    size = int(np.prod(shape))
    if len(body) not in (size, 2 * size):
        raise ValueError(f"field file holds {len(body)} values, expected {size} or {2 * size}")
    grid = GridSpec(dim=dim, origin=origin, spacing=spacing, shape=shape)
    values = np.array([float(v) for v in body[:size]]).reshape(shape)
    mask = None
    if len(body) == 2 * size:
        mask = np.array([int(v) for v in body[size:]], dtype=np.int8).reshape(shape)
    return FieldDump(ScalarField(grid, values), mask)


def write_contour(path: PathLike, contour: ContourPolyline) -> Path:
    path = Path(path)
    axes = ["x", "y", "z"][: contour.dim]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loop_id"] + axes)
        for loop_id, vertex in zip(contour.loop_ids, contour.vertices):
            writer.writerow([int(loop_id)] + [_fmt(c) for c in vertex])
    return path


def read_contour(path: PathLike) -> ContourPolyline:
    """Rebuild a contour; loops are closed when they hold at least three vertices."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "loop_id":
        raise ValueError("contour file must start with a loop_id column")
    dim = len(header) - 1
    loop_ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    vertices = np.array([[float(c) for c in r[1:]] for r in body]).reshape(-1, dim)
    segments: List[Sequence[int]] = []
    closed = []
    if dim == 2:
        for loop in np.unique(loop_ids):
            idx = np.flatnonzero(loop_ids == loop)
            segments.extend(zip(idx[:-1], idx[1:]))
            is_closed = len(idx) >= 3
            if is_closed:
                segments.append((idx[-1], idx[0]))
            closed.append(is_closed)
    else:
        closed = [False]
    return ContourPolyline(
        vertices=vertices,
        segments=np.asarray(segments, dtype=np.int64).reshape(-1, 2),
        loop_ids=loop_ids,
        closed=tuple(closed),
    )


def write_diagnostics(path: PathLike, rows: Iterable[Diagnostics]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow(row.to_row())
    return path


def read_diagnostics(path: PathLike) -> List[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {k: (int(v) if k == "npts" else float(v)) for k, v in row.items()} for row in reader
        ]


def write_report(directory: PathLike, report: ExperimentReport) -> List[Path]:
    """Write ``<name>.txt`` (key: value) and ``<name>_checks.csv``."""
    directory = Path(directory)
    text = directory / f"{report.name}.txt"
    text.write_text(report.to_text())
    table = directory / f"{report.name}_checks.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CHECK_COLUMNS)
        writer.writerows(report.rows())
    return [text, table]
