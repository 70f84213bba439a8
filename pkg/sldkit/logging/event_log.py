from __future__ import annotations

import json
import threading
from collections.abc import Collection
from pathlib import Path

from sldkit.types import LEVEL_ORDER, EventRecord, LogLevel


class EventLog:
    """A run's event stream: one EventRecord per JSON line, appended from any worker thread."""

    def __init__(self, path: Path) -> None:
        self._path = path
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @property
    def path(self) -> Path:
        return self._path

    def append(self, event: EventRecord) -> None:
        line = json.dumps(event.model_dump(mode="json"), ensure_ascii=True)
        with self._lock, self._path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")

    def read(
        self,
        event_types: Collection[str] | None = None,
        min_level: LogLevel = "debug",
    ) -> list[EventRecord]:
        """Recorded events in write order, optionally narrowed by type and severity."""
        if not self._path.exists():
            return []
        lines = self._path.read_text(encoding="utf-8").splitlines()
        records = [EventRecord.model_validate_json(line) for line in lines if line.strip()]
        return [
            record
            for record in records
            if (event_types is None or record.event_type in event_types)
            and LEVEL_ORDER[record.level] <= LEVEL_ORDER[min_level]
        ]
