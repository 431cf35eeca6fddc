"""Source/sink event capture.

Each engine instance appends to its own buffer; buffers are merged after
the run, so appends never take a lock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable


@dataclass
class EventLog:
    # (msg_id, emit_ms)
    source_events: list[tuple[int, float]] = field(default_factory=list)
    # (msg_id, cause_id, arrive_ms)
    sink_events: list[tuple[int, int | None, float]] = field(default_factory=list)

    def record_source(self, msg_id: int, ts_ms: float) -> None:
        self.source_events.append((msg_id, ts_ms))

    def record_sink(self, msg_id: int, cause_id: int | None, ts_ms: float) -> None:
        self.sink_events.append((msg_id, cause_id, ts_ms))

    @classmethod
    def merge(cls, logs: Iterable[EventLog]) -> EventLog:
        out = cls()
        for log in logs:
            out.source_events.extend(log.source_events)
            out.sink_events.extend(log.sink_events)
        out.source_events.sort(key=lambda e: (e[1], e[0]))
        out.sink_events.sort(key=lambda e: (e[2], e[0]))
        return out

    @property
    def end_ms(self) -> float:
        last = 0.0
        if self.source_events:
            last = max(last, max(t for _, t in self.source_events))
        if self.sink_events:
            last = max(last, max(t for _, _, t in self.sink_events))
        return last
