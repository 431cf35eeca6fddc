"""Latency, throughput and jitter over an :class:`EventLog`.

All functions here are pure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import DivisionGuard, OrphanSinkEvent
from .eventlog import EventLog


@dataclass(frozen=True)
class LatencyStats:
    """Box-plot summary of end-to-end latency in milliseconds.

    Quartiles use linear interpolation between order statistics (the
    "type 7" rule); whiskers extend to the most extreme sample within
    1.5 IQR of the box.
    """

    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    whisker_low: float
    whisker_high: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


EMPTY_LATENCY = LatencyStats(0, *([math.nan] * 8))


def message_latencies(log: EventLog) -> list[tuple[int, int, float]]:
    """Per sink event: (msgId, causeId, latencyMs)."""
    emitted = dict(log.source_events)
    out = []
    for msg_id, cause_id, arrive in log.sink_events:
        if cause_id is None or cause_id not in emitted:
            raise OrphanSinkEvent(f"sink message {msg_id} has no source ancestor (cause {cause_id})")
        out.append((msg_id, cause_id, arrive - emitted[cause_id]))
    return out


def latency_stats(values: Iterable[float]) -> LatencyStats:
    arr = np.sort(np.asarray(list(values), dtype=float))
    if arr.size == 0:
        return EMPTY_LATENCY
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    inside = arr[(arr >= q1 - 1.5 * iqr) & (arr <= q3 + 1.5 * iqr)]
    return LatencyStats(
        count=int(arr.size),
        min=float(arr[0]),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(arr[-1]),
        mean=float(arr.mean()),
        whisker_low=float(inside[0]),
        whisker_high=float(inside[-1]),
    )


def compute_latency(log: EventLog) -> LatencyStats:
    return latency_stats(lat for _, _, lat in message_latencies(log))


def rate_series(
    timestamps_ms: Iterable[float],
    interval_ms: float = 1000.0,
    start_ms: float = 0.0,
    end_ms: float | None = None,
) -> list[float]:
    """Events per second in consecutive ``interval_ms`` bins from ``start_ms``.

    With no ``end_ms`` the series stops at the bin holding the last event.
    """
    if interval_ms <= 0:
        raise ValueError("interval must be > 0")
    ts = np.asarray(list(timestamps_ms), dtype=float)
    if end_ms is None:
        if ts.size == 0:
            return []
        nbins = int((ts.max() - start_ms) // interval_ms) + 1
    else:
        nbins = max(0, int(math.ceil((end_ms - start_ms) / interval_ms)))
    if nbins == 0:
        return []
    idx = ((ts - start_ms) // interval_ms).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < nbins)]
    counts = np.bincount(idx, minlength=nbins)
    scale = 1000.0 / interval_ms
    return [float(c) * scale for c in counts]


def compute_throughput(
    log: EventLog,
    interval_ms: float = 1000.0,
    start_ms: float = 0.0,
    end_ms: float | None = None,
) -> list[float]:
    """Aggregate sink output rate (msg/sec) per interval."""
    return rate_series((t for _, _, t in log.sink_events), interval_ms, start_ms, end_ms)


def compute_input_rate(
    log: EventLog,
    interval_ms: float = 1000.0,
    start_ms: float = 0.0,
    end_ms: float | None = None,
) -> list[float]:
    return rate_series((t for _, t in log.source_events), interval_ms, start_ms, end_ms)


def compute_jitter(
    throughput: Sequence[float],
    input_rate: Sequence[float],
    sigma: float,
    long_term_input_rate: float,
) -> list[float]:
    """Per-interval jitter: (out - sigma*in) / (sigma * mean_in).

    ``sigma`` is the dataflow's output:input gain and ``long_term_input_rate``
    the long-run average input rate.
    """
    if len(throughput) != len(input_rate):
        raise ValueError("throughput and input-rate series are not aligned")
    expected_avg = sigma * long_term_input_rate
    if expected_avg == 0:
        raise DivisionGuard("sigma * long-term input rate is zero")
    return [(o - sigma * i) / expected_avg for o, i in zip(throughput, input_rate)]
