from __future__ import annotations

import os
from pathlib import Path
from typing import Any, get_args

import yaml
from pydantic import BaseModel, Field, ValidationError

from sldkit.errors import InputError
from sldkit.estimation.crb import EstimationOptions
from sldkit.linalg.density import DensityTolerances
from sldkit.sld.options import SolverOptions
from sldkit.types import LogLevel

LOG_ENV = "SLDKIT_LOG"


class ToleranceConfig(BaseModel):
    herm_tol: float = Field(default=1e-10, ge=0.0)
    psd_tol: float = Field(default=1e-10, ge=0.0)
    trace_tol: float = Field(default=1e-10, ge=0.0)
    rank_tol: float = Field(default=1e-10, gt=0.0)
    quadratic_tol: float = Field(default=1e-9, gt=0.0)

    def density(self) -> DensityTolerances:
        return DensityTolerances(
            herm_tol=self.herm_tol, psd_tol=self.psd_tol, trace_tol=self.trace_tol
        )


class XvalConfig(BaseModel):
    exact_tol: float = Field(default=1e-8, gt=0.0)
    approx_tol: float = Field(default=1e-6, gt=0.0)


class RuntimeConfig(BaseModel):
    workers: int = Field(default=1, ge=1)


class LoggingConfig(BaseModel):
    level: LogLevel = "warn"
    jsonl_dir: str | None = None
    events_filename: str = "events.jsonl"


class SldkitConfig(BaseModel):
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    xval: XvalConfig = Field(default_factory=XvalConfig)
    estimation: EstimationOptions = Field(default_factory=EstimationOptions)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


class ConfigError(InputError):
    pass


def _read_dotenv(path: Path) -> dict[str, str]:
    if not path.exists():
        return {}
    values: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        text = line.strip()
        if not text or text.startswith("#") or "=" not in text:
            continue
        text = text.removeprefix("export ").strip()
        key, raw = text.split("=", 1)
        value = raw.strip()
        if value[:1] in {"'", '"'} and value[-1:] == value[:1]:
            value = value[1:-1]
        elif " #" in value:
            value = value.split(" #", 1)[0].rstrip()
        if key.strip():
            values[key.strip()] = value.strip()
    return values


def discover_config_path(config_override: Path | None = None) -> Path | None:
    if config_override is not None:
        return config_override.resolve()

    candidates = [
        Path("./sldkit.yaml"),
        Path("~/.config/sldkit/sldkit.yaml").expanduser(),
    ]
    for candidate in candidates:
        if candidate.exists():
            return candidate.resolve()
    return None


def _load_yaml(path: Path) -> dict[str, Any]:
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file is not valid YAML: {path}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"Config file must contain a mapping: {path}")
    return raw


def load_config(config_override: Path | None = None) -> SldkitConfig:
    path = discover_config_path(config_override)
    if path is None:
        return SldkitConfig()
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")

    data = _load_yaml(path)
    try:
        return SldkitConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config at {path}: {exc}") from exc


def write_default_config(path: Path, overwrite: bool = False) -> None:
    if path.exists() and not overwrite:
        raise ConfigError(f"Config file already exists: {path}")

    serialized = yaml.safe_dump(SldkitConfig().model_dump(mode="python"), sort_keys=False)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialized, encoding="utf-8")


def resolve_log_level(config: SldkitConfig) -> LogLevel:
    """SLDKIT_LOG from the environment, then from ./.env, else ``logging.level``."""
    value = os.getenv(LOG_ENV)
    if value is None:
        value = _read_dotenv(Path(".env")).get(LOG_ENV)
    if value is None:
        return config.logging.level
    cleaned = value.strip().lower()
    if cleaned == "warning":
        cleaned = "warn"
    for level in get_args(LogLevel):
        if cleaned == level:
            return level
    raise ConfigError(f"{LOG_ENV}={value!r} is not one of {list(get_args(LogLevel))}")
