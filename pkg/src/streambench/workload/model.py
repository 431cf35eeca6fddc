from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..engine.message import Message


@dataclass(frozen=True)
class StreamWorkload:
    """Time-ordered messages plus derived rate characteristics.

    Build with :meth:`from_messages`, which sorts by timestamp and
    renumbers message ids 0..n-1.
    """

    records: tuple[Message, ...]
    name: str = "workload"
    dropped: int = 0
    sensor_count: int = field(init=False)
    native_span_ms: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sensor_count", len({m.sensor_id for m in self.records}))
        span = self.records[-1].timestamp - self.records[0].timestamp if self.records else 0
        object.__setattr__(self, "native_span_ms", span)

    @classmethod
    def from_messages(cls, messages: Iterable[Message], name: str = "workload", dropped: int = 0) -> StreamWorkload:
        ordered = sorted(messages, key=lambda m: m.timestamp)
        records = tuple(
            Message(i, m.sensor_id, m.timestamp, m.fields, i) for i, m in enumerate(ordered)
        )
        return cls(records, name, dropped)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def start_ms(self) -> int:
        return self.records[0].timestamp if self.records else 0

    def timestamps(self) -> np.ndarray:
        return np.fromiter((m.timestamp for m in self.records), dtype=np.int64, count=len(self.records))

    def rate_profile(self, bin_ms: int = 1000) -> list[int]:
        """Messages per ``bin_ms`` bin from the first timestamp."""
        if not self.records:
            return []
        ts = self.timestamps() - self.start_ms
        return np.bincount(ts // bin_ms).astype(int).tolist()

    def mean_rate(self) -> float:
        """Average messages per second over the native span."""
        if len(self.records) < 2 or self.native_span_ms == 0:
            return float(len(self.records))
        return (len(self.records) - 1) * 1000.0 / self.native_span_ms

    def field_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for m in self.records:
            for k in m.fields:
                seen.setdefault(k, None)
        return list(seen)


@dataclass(frozen=True)
class ScalingSpec:
    temporal: float = 1.0
    spatial: int = 1

    def __post_init__(self) -> None:
        if self.temporal < 1:
            raise ValueError("temporal scaling factor must be >= 1")
        if int(self.spatial) != self.spatial or self.spatial < 1:
            raise ValueError("spatial scaling factor must be an integer >= 1")

    @property
    def effective(self) -> float:
        return self.temporal * self.spatial
