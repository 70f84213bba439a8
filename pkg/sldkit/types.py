from __future__ import annotations

import math
from datetime import datetime

try:
    from datetime import UTC
except ImportError:  # Python < 3.11
    from datetime import timezone

    UTC = timezone.utc
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

LogLevel = Literal["error", "warn", "info", "debug"]
RouteStatus = Literal["ok", "skipped", "failed"]
OutputFormat = Literal["json", "pretty"]

LEVEL_ORDER: dict[LogLevel, int] = {"error": 0, "warn": 1, "info": 2, "debug": 3}


class EventRecord(BaseModel):
    run_id: str
    trace_id: str
    span_id: str
    timestamp: str = Field(default_factory=lambda: datetime.now(tz=UTC).isoformat())
    event_type: str
    level: LogLevel = "info"
    payload: dict[str, Any] = Field(default_factory=dict)


def complex_pairs(mat: Any) -> list[list[list[float]]]:
    """Complex matrix as nested [re, im] pairs."""
    arr = np.asarray(mat, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


def to_jsonable(value: Any) -> Any:
    """numpy scalars and arrays to plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return complex_pairs(value) if value.ndim == 2 else to_jsonable(value.tolist())
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_ | bool):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating | float):
        out = float(value)
        return out if math.isfinite(out) else str(out)
    if isinstance(value, complex | np.complexfloating):
        return [float(value.real), float(value.imag)]
    return value


class SldRecord(BaseModel):
    L: list[list[list[float]]]
    gauge: str
    residual: float
    method: str
    parameter: str
    at: dict[str, float]
    support_rank: int
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class QfiRecord(BaseModel):
    theta: dict[str, float]
    parameter: str
    F: float
    method: str
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class QfiMatrixRecord(BaseModel):
    theta: dict[str, float]
    params: list[str]
    F: list[list[float]]
    method: str
    psd: bool
    min_eigenvalue: float
    diagnostics: dict[str, Any] = Field(default_factory=dict)


class XvalRoute(BaseModel):
    name: str
    exact: bool
    status: RouteStatus
    reason: str | None = None
    F: float | None = None
    residual: float | None = None


class XvalPair(BaseModel):
    first: str
    second: str
    distance: float
    qfi_gap: float
    bound: float
    passed: bool


class XvalRecord(BaseModel):
    theta: dict[str, float]
    parameter: str
    routes: list[XvalRoute]
    pairs: list[XvalPair]
    qfi_spread: float
    passed: bool
    failures: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
