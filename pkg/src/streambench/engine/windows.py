"""Tumbling count/time windows, optionally keyed by sensor id.

Time windows use message (event) timestamps. A time window opened at
``start`` holds messages with ``start <= ts < start + width``; the first
message at or beyond the boundary closes it and opens the window that
contains that message, aligned to multiples of ``width`` from the first
window's start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Mapping

from .message import Message


@dataclass(frozen=True)
class WindowSpec:
    kind: str  # "count" | "time"
    width: int
    keyed: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("count", "time"):
            raise ValueError(f"window kind must be 'count' or 'time', got {self.kind!r}")
        if self.width <= 0:
            raise ValueError("window width must be > 0")

    @classmethod
    def from_params(cls, raw: Any) -> WindowSpec:
        if isinstance(raw, WindowSpec):
            return raw
        if isinstance(raw, int):
            return cls("count", raw)
        if isinstance(raw, Mapping):
            return cls(str(raw.get("kind", "count")).lower(), int(raw["width"]), bool(raw.get("keyed", True)))
        raise ValueError(f"cannot build a WindowSpec from {raw!r}")


@dataclass
class _Pane:
    items: list[Message] = field(default_factory=list)
    start: int | None = None


@dataclass
class WindowState:
    panes: dict[Hashable, _Pane] = field(default_factory=dict)

    def pending(self) -> int:
        return sum(len(p.items) for p in self.panes.values())

    def drain(self) -> list[list[Message]]:
        """Remove and return every partially filled window (end of stream)."""
        out = [p.items for p in self.panes.values() if p.items]
        self.panes.clear()
        return out


def window_key(msg: Message, spec: WindowSpec) -> Hashable:
    return msg.sensor_id if spec.keyed else None


def window_accumulate(state: WindowState, msg: Message, spec: WindowSpec, key: Hashable = ...) -> list[Message] | None:
    """Add ``msg`` to its window; return the completed batch, if any."""
    if key is ...:
        key = window_key(msg, spec)
    pane = state.panes.get(key)
    if pane is None:
        pane = state.panes[key] = _Pane()

    if spec.kind == "count":
        pane.items.append(msg)
        if len(pane.items) >= spec.width:
            batch = pane.items
            pane.items = []
            return batch
        return None

    ts = msg.timestamp
    if pane.start is None:
        pane.start = ts
    if ts - pane.start >= spec.width:
        batch = pane.items
        pane.start += ((ts - pane.start) // spec.width) * spec.width
        pane.items = [msg]
        return batch or None
    pane.items.append(msg)
    return None
