"""Append-only JSONL event log for the rating study.

Every line is one event with a schema version field (``"v": 1``). The log is
the single source of truth: replaying it reconstructs session state, Glicko
ratings, and test statistics exactly.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path


class CorruptLogError(RuntimeError):
    pass


class EventLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, event_type: str, data: dict) -> dict:
        event = {"v": 1, "type": event_type, **data}
        line = json.dumps(event, sort_keys=True)
        with self._lock:
            with self.path.open("a") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return event

    def read_all(self) -> list[dict]:
        if not self.path.exists():
            return []
        events = []
        with self.path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorruptLogError(f"{self.path}:{lineno}: {exc}") from exc
                if event.get("v") != 1 or "type" not in event:
                    raise CorruptLogError(
                        f"{self.path}:{lineno}: missing schema version or type"
                    )
                events.append(event)
        return events
