"""Paced replay of workloads, and the source tasks built on it.

Pacing sleeps until each message's deadline and, when it wakes late, emits
every message already due in one burst instead of drifting.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ..engine.message import Message
from ..engine.routing import stable_hash
from ..engine.task import SourceTask, TaskContext
from .model import StreamWorkload

# a message emitted more than this late counts as a clock overrun
OVERRUN_MS = 20.0
_SPIN_S = 0.0005


@dataclass
class ReplayStats:
    emitted: int = 0
    intended_span_ms: float = 0.0
    achieved_span_ms: float = 0.0
    overruns: int = 0
    max_lag_ms: float = 0.0
    stopped_early: bool = False

    @property
    def intended_rate(self) -> float:
        if self.emitted < 2 or self.intended_span_ms == 0:
            return float("nan")
        return (self.emitted - 1) * 1000.0 / self.intended_span_ms

    @property
    def achieved_rate(self) -> float:
        if self.emitted < 2 or self.achieved_span_ms == 0:
            return float("nan")
        return (self.emitted - 1) * 1000.0 / self.achieved_span_ms

    @property
    def clock_overrun(self) -> bool:
        return self.overruns > 0


def _sleep_until(deadline: float, stop: threading.Event) -> bool:
    """Sleep until ``deadline`` (perf_counter seconds); False if stopped first."""
    while True:
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return True
        if remaining > 0.05:
            if stop.wait(remaining - 0.01):
                return False
        elif remaining > _SPIN_S:
            time.sleep(remaining - _SPIN_S / 2)
        else:
            return True


def replay(
    workload: StreamWorkload | list[Message],
    emit: Callable[[Message], Any],
    temporal_factor: float = 1.0,
    stop: threading.Event | None = None,
    start_at: float | None = None,
    offsets_ms: np.ndarray | None = None,
) -> ReplayStats:
    """Emit messages with gaps proportional to their (scaled) timestamps.

    ``temporal_factor`` compresses time online at emit time. ``start_at``
    is the perf_counter instant of the first message (default: now).
    """
    records = workload.records if isinstance(workload, StreamWorkload) else list(workload)
    stats = ReplayStats()
    if not records:
        return stats
    stop = stop or threading.Event()
    if offsets_ms is None:
        t0 = records[0].timestamp
        offsets_ms = np.fromiter((m.timestamp - t0 for m in records), dtype=float, count=len(records))
    offs = offsets_ms / (1000.0 * temporal_factor)
    start = time.perf_counter() if start_at is None else start_at
    stats.intended_span_ms = float(offs[-1] - offs[0]) * 1000.0

    n = len(records)
    i = 0
    first_emit = last_emit = None
    overrun_s = OVERRUN_MS / 1000.0
    while i < n:
        if stop.is_set():
            stats.stopped_early = True
            break
        due = start + offs[i]
        now = time.perf_counter()
        if due > now:
            if not _sleep_until(due, stop):
                stats.stopped_early = True
                break
            now = time.perf_counter()
        # catch up: everything already due goes out now
        while i < n and start + offs[i] <= now:
            lag = now - (start + offs[i])
            if lag > overrun_s:
                stats.overruns += 1
            if lag * 1000.0 > stats.max_lag_ms:
                stats.max_lag_ms = float(lag) * 1000.0
            emit(records[i])
            i += 1
            if first_emit is None:
                first_emit = now
            last_emit = now
            if i % 256 == 0:
                now = time.perf_counter()
    stats.emitted = i
    if first_emit is not None:
        stats.achieved_span_ms = (last_emit - first_emit) * 1000.0
    return stats


class ReplaySource(SourceTask):
    """Replays the run's workload; parallel instances shard it by sensor id.

    ``prepare`` (optional) reshapes each record before emission, e.g. to
    encode it in the wire format the next task expects.
    """

    def __init__(
        self,
        temporal: float = 1.0,
        lead_in_ms: float = 20.0,
        prepare: Callable[[Message], Message] | None = None,
        workload: StreamWorkload | None = None,
        **_: Any,
    ):
        self.temporal = float(temporal)
        self.lead_in_ms = lead_in_ms
        self.prepare = prepare
        self.workload = workload

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        w = self.workload if self.workload is not None else ctx.workload
        if w is None:
            raise ValueError(f"source {ctx.name!r} has no workload to replay")
        if ctx.parallelism > 1:
            mine = [m for m in w.records if stable_hash(m.sensor_id) % ctx.parallelism == ctx.instance]
            t0 = w.start_ms
            self.offsets = np.fromiter((m.timestamp - t0 for m in mine), dtype=float, count=len(mine))
            self.records = mine
        else:
            self.records = list(w.records)
            self.offsets = None
        if self.prepare is not None:
            self.records = [self.prepare(m) for m in self.records]

    def run(self, emit, stop) -> ReplayStats:
        start = self.ctx.clock_origin + self.lead_in_ms / 1000.0
        return replay(self.records, emit, self.temporal, stop, start_at=start, offsets_ms=self.offsets)


class RateSource(SourceTask):
    """Constant-rate synthetic source for micro-benchmarks.

    Emits ``make(i, rng)`` messages (default: a random integer ``value``)
    at ``rate`` msg/sec for ``count`` messages or ``duration_ms``.
    """

    def __init__(
        self,
        rate: float,
        count: int | None = None,
        duration_ms: float | None = None,
        sensors: int = 16,
        make: Callable[[int, np.random.Generator], Message] | None = None,
        lead_in_ms: float = 20.0,
        **_: Any,
    ):
        if rate <= 0:
            raise ValueError("rate must be > 0")
        if count is None and duration_ms is None:
            raise ValueError("RateSource needs count or duration_ms")
        self.rate = float(rate)
        self.count = count if count is not None else int(self.rate * duration_ms / 1000.0)
        self.sensors = sensors
        self.make = make
        self.lead_in_ms = lead_in_ms

    def _default(self, i: int, rng: np.random.Generator) -> Message:
        return Message(i, f"s{i % self.sensors}", i, {"value": int(rng.integers(0, 1 << 31))}, i)

    def run(self, emit, stop) -> ReplayStats:
        rng = np.random.default_rng(self.ctx.seed)
        make = self.make or self._default
        msgs = [make(i, rng) for i in range(self.count)]
        period_ms = 1000.0 / self.rate
        offsets = np.arange(self.count, dtype=float) * period_ms
        start = self.ctx.clock_origin + self.lead_in_ms / 1000.0
        return replay(msgs, emit, 1.0, stop, start_at=start, offsets_ms=offsets)


class TimerSource(SourceTask):
    """Emits a tick every ``period_ms`` of benchmark time, ``count`` times."""

    def __init__(self, period_ms: float, count: int = 1, first_at_ms: float | None = None, **_: Any):
        self.period_ms = float(period_ms)
        self.count = int(count)
        self.first_at_ms = self.period_ms if first_at_ms is None else float(first_at_ms)

    def run(self, emit, stop) -> ReplayStats:
        offsets = self.first_at_ms + np.arange(self.count, dtype=float) * self.period_ms
        # a tick's timestamp is its scheduled offset into the run
        ticks = [Message(i, "timer", int(off), {"tick": i}, i) for i, off in enumerate(offsets)]
        return replay(ticks, emit, 1.0, stop, start_at=self.ctx.clock_origin, offsets_ms=offsets)
