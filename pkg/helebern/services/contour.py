"""Discrete interface extraction and polyline metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import NoInterface
from .geometry import ScalarField, enclosed_volume

logger = logging.getLogger("helebern.contour")

_CHUNK = 512

# cell corners counterclockwise, then the edges between consecutive corners
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_EDGES = ((0, 1), (1, 2), (3, 2), (0, 3))


@dataclass(frozen=True)
class ContourPolyline:
    """Zero level set as loops of vertices.

    Segments are oriented with the enclosed set on their left, so loops around
    a component run counterclockwise and the right-hand normal points outward.
    In 3D only the edge-crossing vertices are kept and ``segments`` is empty.
    """

    vertices: np.ndarray
    segments: np.ndarray
    loop_ids: np.ndarray
    closed: Tuple[bool, ...]

    @property
    def dim(self) -> int:
        return int(self.vertices.shape[1])

    @property
    def n_loops(self) -> int:
        return len(self.closed)

    def __len__(self) -> int:
        return int(self.vertices.shape[0])

    def segment_vectors(self) -> np.ndarray:
        return self.vertices[self.segments[:, 1]] - self.vertices[self.segments[:, 0]]

    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.segment_vectors(), axis=1)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.segments[:, 0]] + self.vertices[self.segments[:, 1]])

    def outward_normals(self) -> np.ndarray:
        d = self.segment_vectors()
        length = np.maximum(np.linalg.norm(d, axis=1), np.finfo(float).tiny)
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None]

    def loop(self, loop_id: int) -> np.ndarray:
        return self.vertices[self.loop_ids == loop_id]


def _edge_vertex(values: np.ndarray, origin: np.ndarray, h: float, a, b) -> np.ndarray:
    fa, fb = values[a], values[b]
    t = fa / (fa - fb)
    pa = origin + h * np.asarray(a, dtype=float)
    pb = origin + h * np.asarray(b, dtype=float)
    return pa + t * (pb - pa)


def _extract_2d(phi: ScalarField) -> ContourPolyline:
    values = phi.values
    h = phi.grid.spacing
    origin = np.asarray(phi.grid.origin)
    nx, ny = values.shape
    inside = values < 0

    # a cell is active when its corners disagree
    corner_sum = (
        inside[:-1, :-1].astype(int) + inside[1:, :-1] + inside[1:, 1:] + inside[:-1, 1:]
    )
    active = np.argwhere((corner_sum > 0) & (corner_sum < 4))

    vertex_of: Dict[Tuple[int, int, int], int] = {}
    points: List[np.ndarray] = []
    successor: Dict[int, int] = {}

    def vertex(a: Tuple[int, int], b: Tuple[int, int]) -> int:
        # edge key: lower node plus axis
        lo = min(a, b)
        axis = 0 if a[1] == b[1] else 1
        key = (lo[0], lo[1], axis)
        idx = vertex_of.get(key)
        if idx is None:
            idx = len(points)
            vertex_of[key] = idx
            points.append(_edge_vertex(values, origin, h, a, b))
        return idx

    for i, j in active:
        nodes = [(i + di, j + dj) for di, dj in _CORNERS]
        ins = [bool(inside[n]) for n in nodes]
        crossed = [k for k, (p, q) in enumerate(_EDGES) if ins[p] != ins[q]]
        pairs: List[Tuple[int, int, int]] = []
        if len(crossed) == 2:
            ref = ins.index(True)
            pairs.append((crossed[0], crossed[1], ref))
        else:
            center_inside = np.mean([values[n] for n in nodes]) < 0
            # corners cut off on their own: outside ones when the centre is inside
            for c in range(4):
                if ins[c] != center_inside:
                    adjacent = [k for k, e in enumerate(_EDGES) if c in e]
                    pairs.append((adjacent[0], adjacent[1], c))
        for ea, eb, ref in pairs:
            va = vertex(nodes[_EDGES[ea][0]], nodes[_EDGES[ea][1]])
            vb = vertex(nodes[_EDGES[eb][0]], nodes[_EDGES[eb][1]])
            if va == vb:
                continue
            p, q = points[va], points[vb]
            c = origin + h * np.asarray(nodes[ref], dtype=float)
            d = q - p
            cross = d[0] * (c[1] - p[1]) - d[1] * (c[0] - p[0])
            # reference corner inside must sit on the left
            if (cross > 0) != ins[ref]:
                va, vb = vb, va
            successor[va] = vb

    if not points:
        raise NoInterface("no zero crossing found")
    return _assemble_loops(np.asarray(points), successor)


def _assemble_loops(points: np.ndarray, successor: Dict[int, int]) -> ContourPolyline:
    predecessor = {b: a for a, b in successor.items()}
    visited = np.zeros(len(points), dtype=bool)
    order: List[int] = []
    loop_ids: List[int] = []
    segments: List[Tuple[int, int]] = []
    closed: List[bool] = []

    # open chains first (they start at vertices without predecessor)
    starts = [v for v in range(len(points)) if v not in predecessor]
    starts += [v for v in range(len(points)) if v in predecessor]
    for start in starts:
        if visited[start]:
            continue
        loop = len(closed)
        first = len(order)
        v: Optional[int] = start
        is_closed = False
        while v is not None and not visited[v]:
            visited[v] = True
            order.append(v)
            loop_ids.append(loop)
            nxt = successor.get(v)
            if nxt is None:
                break
            if nxt == start:
                is_closed = True
                break
            v = nxt
        last = len(order) - 1
        segments.extend((k, k + 1) for k in range(first, last))
        if is_closed and last > first:
            segments.append((last, first))
        closed.append(is_closed)

    return ContourPolyline(
        vertices=points[np.asarray(order)],
        segments=np.asarray(segments, dtype=np.int64).reshape(-1, 2),
        loop_ids=np.asarray(loop_ids, dtype=np.int64),
        closed=tuple(closed),
    )


def _extract_3d(phi: ScalarField) -> ContourPolyline:
    values = phi.values
    h = phi.grid.spacing
    origin = np.asarray(phi.grid.origin)
    inside = values < 0
    clouds = []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        fa, fb = values[tuple(lo)], values[tuple(hi)]
        cut = inside[tuple(lo)] != inside[tuple(hi)]
        idx = np.argwhere(cut)
        t = fa[cut] / (fa[cut] - fb[cut])
        pts = origin + h * idx.astype(float)
        pts[:, axis] += h * t
        clouds.append(pts)
    vertices = np.concatenate(clouds)
    if vertices.size == 0:
        raise NoInterface("no zero crossing found")
    return ContourPolyline(
        vertices=vertices,
        segments=np.empty((0, 2), dtype=np.int64),
        loop_ids=np.zeros(len(vertices), dtype=np.int64),
        closed=(False,),
    )


def extract_contour(phi: ScalarField) -> ContourPolyline:
    """Marching-squares polyline of {phi = 0} (vertex cloud in 3D)."""
    contour = _extract_2d(phi) if phi.grid.dim == 2 else _extract_3d(phi)
    logger.debug(
        "contour extracted", extra={"vertices": len(contour), "loops": contour.n_loops}
    )
    return contour


# -- metrics ------------------------------------------------------------------


def _point_segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest segment [a_k, b_k]."""
    ab = b - a
    denom = np.maximum(np.sum(ab * ab, axis=1), np.finfo(float).tiny)
    best = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        p = points[start : start + _CHUNK, None, :]
        t = np.clip(np.sum((p - a) * ab, axis=2) / denom, 0.0, 1.0)
        closest = a + t[..., None] * ab
        best[start : start + _CHUNK] = np.sqrt(np.min(np.sum((p - closest) ** 2, axis=2), axis=1))
    return best


def _directed(a: ContourPolyline, b: ContourPolyline) -> float:
    if len(b.segments) == 0:
        dist, _ = cKDTree(b.vertices).query(a.vertices)
        return float(np.max(dist))
    seg_a = b.vertices[b.segments[:, 0]]
    seg_b = b.vertices[b.segments[:, 1]]
    return float(np.max(_point_segment_distances(a.vertices, seg_a, seg_b)))


def hausdorff_distance(a: ContourPolyline, b: ContourPolyline) -> float:
    """Symmetric Hausdorff distance, vertices measured against the other polyline."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("hausdorff_distance needs two nonempty contours")
    return max(_directed(a, b), _directed(b, a))


def contour_length(contour: ContourPolyline) -> float:
    return float(np.sum(contour.segment_lengths()))


def enclosed_area(contour: ContourPolyline) -> float:
    """Signed shoelace area; positive for counterclockwise loops around the set."""
    p = contour.vertices[contour.segments[:, 0]]
    q = contour.vertices[contour.segments[:, 1]]
    return float(0.5 * np.sum(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]))


def equivalent_radius(phi: ScalarField, contour: Optional[ContourPolyline] = None) -> float:
    """Radius of the ball with the same measure as {phi < 0}.

    2D uses the area enclosed by the contour, 3D the smoothed volume.
    """
    if phi.grid.dim == 2:
        contour = contour if contour is not None else extract_contour(phi)
        return float(np.sqrt(max(enclosed_area(contour), 0.0) / np.pi))
    return float((3.0 * enclosed_volume(phi) / (4.0 * np.pi)) ** (1.0 / 3.0))
