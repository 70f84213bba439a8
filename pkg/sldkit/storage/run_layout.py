from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from uuid import uuid4


def new_run_id() -> str:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return f"{stamp}-{uuid4().hex[:8]}"


@dataclass(frozen=True)
class RunLayout:
    """Where one run keeps its event stream and result records."""

    root: Path
    run_id: str
    events_filename: str = "events.jsonl"

    @property
    def directory(self) -> Path:
        return self.root / self.run_id

    @property
    def events_file(self) -> Path:
        return self.directory / self.events_filename

    def create(self) -> RunLayout:
        self.directory.mkdir(parents=True, exist_ok=True)
        return self

    def save_record(self, filename: str, content: str) -> Path:
        """Result records (sld.json, qfi_sweep.jsonl, ...) sit next to the event stream."""
        path = self.directory / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        return path

    def saved_records(self) -> list[str]:
        if not self.directory.exists():
            return []
        names = (p.name for p in self.directory.iterdir() if p.is_file())
        return sorted(name for name in names if name != self.events_filename)
