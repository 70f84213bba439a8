from __future__ import annotations

from pathlib import Path

from sldkit.model.spec import ModelLoadError, ModelSpec, load_model


class ModelRegistry:
    def __init__(self, models_dir: Path) -> None:
        self.models_dir = models_dir

    def load(self) -> list[ModelSpec]:
        if not self.models_dir.exists():
            return []
        return [load_model(path) for path in sorted(self.models_dir.glob("*.json"))]

    @staticmethod
    def by_name(models: list[ModelSpec], name: str) -> ModelSpec | None:
        for model in models:
            if model.name == name:
                return model
        return None

    def resolve(self, ref: str | Path) -> ModelSpec:
        """Load ``ref`` as a path, else as a bundled model name or file name."""
        path = Path(ref)
        if path.exists():
            return load_model(path)
        for candidate in (self.models_dir / path.name, self.models_dir / f"{path.name}.json"):
            if candidate.is_file():
                return load_model(candidate)
        raise ModelLoadError(f"Model file not found: {ref} (also searched {self.models_dir})")
