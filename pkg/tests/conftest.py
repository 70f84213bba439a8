from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from sldkit.linalg.density import DensityMatrix, validate_density  # noqa: E402

MODELS_DIR = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture()
def models_dir() -> Path:
    return MODELS_DIR


@pytest.fixture()
def random_state(rng: np.random.Generator):
    """Ginibre states; ``floor`` mixes in white noise to keep the spectrum away from zero."""

    def _make(dim: int, rank: int | None = None, floor: float = 0.05) -> DensityMatrix:
        k = dim if rank is None else rank
        g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
        w = g @ g.conj().T
        w /= np.real(np.trace(w))
        if rank is None:
            w = (1 - floor) * w + floor * np.eye(dim) / dim
        return validate_density((w + w.conj().T) / 2)

    return _make


@pytest.fixture()
def random_hermitian(rng: np.random.Generator):
    def _make(dim: int, traceless: bool = True) -> np.ndarray:
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = (a + a.conj().T) / 2
        if traceless:
            h -= np.trace(h) / dim * np.eye(dim)
        return h

    return _make


@pytest.fixture()
def make_model(tmp_path: Path):
    def _make(data: dict[str, Any], filename: str | None = None) -> Path:
        name = filename or f"{data.get('name', 'model')}.json"
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _make
