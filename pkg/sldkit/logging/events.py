from __future__ import annotations

import re
import threading
import uuid
from collections.abc import Callable
from contextlib import suppress
from dataclasses import dataclass
from typing import Any

from sldkit.logging.event_log import EventLog
from sldkit.types import LEVEL_ORDER, EventRecord, LogLevel, to_jsonable

# Keep common whitespace control characters, remove the rest.
_CONTROL_PATTERN = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")


@dataclass
class EventContext:
    run_id: str
    trace_id: str


class EventBus:
    """Fans events out to an optional JSONL sink (every level) and a renderer (gated)."""

    def __init__(
        self,
        context: EventContext,
        sink: EventLog | None = None,
        level: LogLevel = "warn",
        on_emit: Callable[[EventRecord], None] | None = None,
    ) -> None:
        self._context = context
        self._sink = sink
        self._level = level
        self._on_emit = on_emit
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}

    @property
    def run_id(self) -> str:
        return self._context.run_id

    @property
    def sink(self) -> EventLog | None:
        return self._sink

    def enabled(self, level: LogLevel) -> bool:
        return LEVEL_ORDER[level] <= LEVEL_ORDER[self._level]

    def count(self, event_type: str) -> int:
        return self._counts.get(event_type, 0)

    def _clean_payload(self, payload: dict[str, Any]) -> dict[str, Any]:
        cleaned: dict[str, Any] = {}
        for key, value in to_jsonable(payload).items():
            cleaned[key] = _CONTROL_PATTERN.sub("", value) if isinstance(value, str) else value
        return cleaned

    def emit(
        self,
        event_type: str,
        payload: dict[str, Any] | None = None,
        level: LogLevel = "info",
    ) -> EventRecord:
        event = EventRecord(
            run_id=self._context.run_id,
            trace_id=self._context.trace_id,
            span_id=uuid.uuid4().hex[:12],
            event_type=event_type,
            level=level,
            payload=self._clean_payload(payload or {}),
        )
        with self._lock:
            self._counts[event_type] = self._counts.get(event_type, 0) + 1
        if self._sink is not None:
            self._sink.append(event)
        if self._on_emit is not None and self.enabled(level):
            with suppress(Exception):
                self._on_emit(event)
        return event


def null_bus() -> EventBus:
    """A bus with no sink and no renderer, for library callers that want none."""
    return EventBus(EventContext(run_id="local", trace_id=uuid.uuid4().hex))
