from __future__ import annotations

from pathlib import Path

import pytest

from sldkit.config import (
    ConfigError,
    SldkitConfig,
    discover_config_path,
    load_config,
    resolve_log_level,
    write_default_config,
)


def test_load_default_config_when_missing(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    config = load_config(None)
    assert isinstance(config, SldkitConfig)
    assert config.tolerances.rank_tol == 1e-10
    assert config.xval.exact_tol == 1e-8
    assert config.estimation.grid_points == 512


def test_config_discovery_prefers_local(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    local = tmp_path / "sldkit.yaml"
    local.write_text("runtime:\n  workers: 2\n", encoding="utf-8")
    assert discover_config_path(None) == local
    assert load_config(None).runtime.workers == 2


def test_write_default_and_reload(tmp_path: Path) -> None:
    path = tmp_path / "sldkit.yaml"
    write_default_config(path)
    config = load_config(path)
    assert config == SldkitConfig()
    with pytest.raises(ConfigError, match="already exists"):
        write_default_config(path)
    write_default_config(path, overwrite=True)


def test_nested_solver_options(tmp_path: Path) -> None:
    path = tmp_path / "sldkit.yaml"
    path.write_text(
        "solver:\n  series:\n    s: 12.5\n  quadrature:\n    tail_doublings_max: 8\n",
        encoding="utf-8",
    )
    config = load_config(path)
    assert config.solver.series.s == 12.5
    assert config.solver.quadrature.tail_doublings_max == 8


@pytest.mark.parametrize(
    "text",
    [
        "tolerances: [1, 2\n",
        "- just\n- a list\n",
        "tolerances:\n  rank_tol: -1\n",
        "runtime:\n  workers: 0\n",
    ],
)
def test_invalid_config_is_rejected(tmp_path: Path, text: str) -> None:
    path = tmp_path / "sldkit.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_explicit_config(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_log_level_from_environment(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SLDKIT_LOG", " Debug ")
    assert resolve_log_level(SldkitConfig()) == "debug"
    monkeypatch.setenv("SLDKIT_LOG", "warning")
    assert resolve_log_level(SldkitConfig()) == "warn"


def test_log_level_from_dotenv(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SLDKIT_LOG", raising=False)
    (tmp_path / ".env").write_text("export SLDKIT_LOG='info'\n", encoding="utf-8")
    assert resolve_log_level(SldkitConfig()) == "info"
    monkeypatch.setenv("SLDKIT_LOG", "error")
    assert resolve_log_level(SldkitConfig()) == "error"


def test_log_level_falls_back_to_config(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SLDKIT_LOG", raising=False)
    config = SldkitConfig.model_validate({"logging": {"level": "info"}})
    assert resolve_log_level(config) == "info"


def test_bad_log_level(tmp_path: Path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SLDKIT_LOG", "loud")
    with pytest.raises(ConfigError, match="SLDKIT_LOG"):
        resolve_log_level(SldkitConfig())
