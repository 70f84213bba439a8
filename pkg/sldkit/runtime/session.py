from __future__ import annotations

import uuid
import warnings
from collections.abc import Callable
from contextlib import ExitStack
from pathlib import Path
from types import TracebackType

from sldkit.config import SldkitConfig
from sldkit.errors import SldkitError
from sldkit.logging.event_log import EventLog
from sldkit.logging.events import EventBus, EventContext
from sldkit.storage.run_layout import RunLayout, new_run_id
from sldkit.types import EventRecord, LogLevel


class RunSession:
    """One CLI invocation: run id, event bus, captured Python warnings."""

    def __init__(
        self,
        config: SldkitConfig,
        command: str,
        level: LogLevel | None = None,
        on_emit: Callable[[EventRecord], None] | None = None,
    ) -> None:
        self.config = config
        self.command = command
        self.run_id = new_run_id()
        self.layout: RunLayout | None = None
        sink: EventLog | None = None
        if config.logging.jsonl_dir:
            self.layout = RunLayout(
                Path(config.logging.jsonl_dir), self.run_id, config.logging.events_filename
            ).create()
            sink = EventLog(self.layout.events_file)
        self.bus = EventBus(
            EventContext(run_id=self.run_id, trace_id=uuid.uuid4().hex),
            sink=sink,
            level=level or config.logging.level,
            on_emit=on_emit,
        )
        self._stack = ExitStack()
        self._caught: list[warnings.WarningMessage] = []

    def __enter__(self) -> RunSession:
        self._caught = self._stack.enter_context(warnings.catch_warnings(record=True))
        warnings.simplefilter("always")
        self.bus.emit("run_started", {"command": self.command})
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> bool:
        self._stack.close()
        for caught in self._caught:
            self.bus.emit(
                "numerical_warning",
                {"category": caught.category.__name__, "message": str(caught.message)},
                level="warn",
            )
        if exc is None:
            self.bus.emit("run_finished", {"command": self.command})
        elif isinstance(exc, SldkitError):
            self.bus.emit(
                "run_failed",
                {
                    "command": self.command,
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "exit_code": exc.exit_code,
                },
                level="error",
            )
        return False

    def save_result(self, filename: str, content: str) -> Path | None:
        if self.layout is None:
            return None
        return self.layout.save_record(filename, content)
