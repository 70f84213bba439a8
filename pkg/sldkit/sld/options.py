from __future__ import annotations

from pydantic import BaseModel, Field


class QuadratureOptions(BaseModel):
    panel_doublings_max: int = Field(default=12, ge=1)
    tail_doublings_max: int = Field(default=64, ge=1)
    gl_points_per_panel: int = Field(default=8, ge=1)
    abs_tol: float = Field(default=1e-10, gt=0.0)


class SeriesOptions(BaseModel):
    # None picks s from the spectrum, balancing truncation against cancellation.
    s: float | None = Field(default=None, gt=0.0)
    n_max: int = Field(default=400, ge=0)


class SolverOptions(BaseModel):
    abs_tol: float = Field(default=1e-10, gt=0.0)
    rank_tol: float = Field(default=1e-10, gt=0.0)
    quadrature: QuadratureOptions = Field(default_factory=QuadratureOptions)
    series: SeriesOptions = Field(default_factory=SeriesOptions)
