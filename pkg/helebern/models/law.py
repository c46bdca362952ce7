from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

LawKind = Literal["constant", "mean_curvature", "affine"]


class SpeedLaw(BaseModel):
    """Normal velocity law h = F(nu, H) + lambda * hbar.

    ``constant``: F = c.  ``mean_curvature``: F = a * Tr H / (N - 1).
    ``affine``: F = a * Tr H / (N - 1) + c.  The curvature weight ``a`` is
    nonnegative so that F is nondecreasing in the curvature matrix.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: LawKind
    a: float = Field(default=0.0, ge=0)
    c: float = 0.0
    lam: float = Field(default=0.0, ge=0, alias="lambda")

    @model_validator(mode="after")
    def check_kind(self) -> "SpeedLaw":
        if self.kind == "mean_curvature" and self.a <= 0:
            raise ValueError("mean_curvature law needs a > 0")
        if self.kind == "constant" and self.a != 0:
            raise ValueError("constant law takes no curvature weight")
        if self.kind == "mean_curvature" and self.c != 0:
            raise ValueError("mean_curvature law takes no constant part")
        return self

    @classmethod
    def constant(cls, c: float, lam: float = 0.0) -> "SpeedLaw":
        return cls(kind="constant", c=c, lam=lam)

    @classmethod
    def mean_curvature(cls, a: float = 1.0, lam: float = 0.0) -> "SpeedLaw":
        return cls(kind="mean_curvature", a=a, lam=lam)

    @classmethod
    def affine(cls, a: float, c: float, lam: float = 0.0) -> "SpeedLaw":
        return cls(kind="affine", a=a, c=c, lam=lam)

    @property
    def curvature_weight(self) -> float:
        return self.a if self.kind != "constant" else 0.0

    @property
    def constant_part(self) -> float:
        return self.c if self.kind != "mean_curvature" else 0.0

    def F(self, trace_h, dim: int):
        """Curvature part of the velocity; works on scalars and arrays alike."""
        if dim < 2:
            raise ValueError("dimension must be at least 2")
        return self.curvature_weight * trace_h / (dim - 1) + self.constant_part

    def velocity(self, trace_h, hbar, dim: int):
        return self.F(trace_h, dim) + self.lam * hbar

    def with_lambda(self, lam: float) -> "SpeedLaw":
        return type(self)(kind=self.kind, a=self.a, c=self.c, lam=lam)

    def same_f(self, other: "SpeedLaw") -> bool:
        return (self.kind, self.curvature_weight, self.constant_part) == (
            other.kind,
            other.curvature_weight,
            other.constant_part,
        )
