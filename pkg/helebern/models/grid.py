from __future__ import annotations

from functools import lru_cache
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MIN_NODES = 16


class GridSpec(BaseModel):
    """Uniform Cartesian node grid.

    Nodes sit at ``origin + i * spacing`` for ``i = 0 .. shape - 1`` along each
    axis; arrays sampled on the grid use ``indexing="ij"`` so that axis 0 is x.
    """

    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., description="Spatial dimension (2 or 3)")
    origin: Tuple[float, ...]
    spacing: float = Field(..., gt=0)
    shape: Tuple[int, ...] = Field(..., description="Node count per axis")

    @field_validator("dim")
    @classmethod
    def supported_dim(cls, v: int) -> int:
        if v not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        return v

    @model_validator(mode="after")
    def consistent_axes(self) -> "GridSpec":
        if len(self.origin) != self.dim or len(self.shape) != self.dim:
            raise ValueError("origin and shape need one entry per axis")
        if any(n < MIN_NODES for n in self.shape):
            raise ValueError(f"every axis needs at least {MIN_NODES} nodes")
        if not all(np.isfinite(self.origin)):
            raise ValueError("origin must be finite")
        return self

    @classmethod
    def from_bounds(
        cls,
        lower: Union[float, Sequence[float]],
        upper: Union[float, Sequence[float]],
        cells: int,
        dim: int = 2,
    ) -> "GridSpec":
        """Grid with ``cells`` intervals per axis over ``[lower, upper]``.

        Anisotropic spacing is rejected: every axis must have the same extent.
        """
        lo = _per_axis(lower, dim)
        hi = _per_axis(upper, dim)
        if cells < MIN_NODES - 1:
            raise ValueError(f"grid needs at least {MIN_NODES - 1} cells per axis")
        steps = [(b - a) / cells for a, b in zip(lo, hi)]
        if any(s <= 0 for s in steps):
            raise ValueError("grid upper bound must exceed lower bound on every axis")
        if max(steps) - min(steps) > 1e-12 * max(steps):
            raise ValueError("anisotropic grids are not supported (equal extents required)")
        return cls(dim=dim, origin=tuple(lo), spacing=steps[0], shape=(cells + 1,) * dim)

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def upper(self) -> Tuple[float, ...]:
        return tuple(o + (n - 1) * self.spacing for o, n in zip(self.origin, self.shape))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape))

    def mesh(self) -> Tuple[np.ndarray, ...]:
        """Node coordinate arrays (read-only, shared between callers)."""
        return _mesh(self)

    def coords(self, node: Sequence[int]) -> np.ndarray:
        return np.array([o + i * self.spacing for o, i in zip(self.origin, node)], dtype=float)

    def to_index_space(self, points: np.ndarray) -> np.ndarray:
        """Fractional node indices for physical points of shape (n, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return ((pts - np.asarray(self.origin)) / self.spacing).T

    def nearest_node(self, point: Sequence[float]) -> Tuple[int, ...]:
        idx = np.rint(self.to_index_space(np.asarray(point))[:, 0]).astype(int)
        return tuple(int(np.clip(i, 0, n - 1)) for i, n in zip(idx, self.shape))


def _per_axis(value: Union[float, Sequence[float]], dim: int) -> Tuple[float, ...]:
    if np.isscalar(value):
        return (float(value),) * dim  # type: ignore[arg-type]
    values = tuple(float(v) for v in value)  # type: ignore[union-attr]
    if len(values) != dim:
        raise ValueError(f"expected {dim} values, got {len(values)}")
    return values


@lru_cache(maxsize=16)
def _mesh(grid: GridSpec) -> Tuple[np.ndarray, ...]:
    arrays = np.meshgrid(*grid.axes(), indexing="ij")
    for a in arrays:
        a.setflags(write=False)
    return tuple(arrays)
