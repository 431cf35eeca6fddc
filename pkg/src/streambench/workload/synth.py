"""Synthetic workloads with a named per-second rate shape."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from ..engine.message import Message
from .model import StreamWorkload

DISTRIBUTIONS = ("uniform", "sawtooth", "normal", "bimodal", "burst")

# ratio of the smaller to the larger peak of the bimodal shape (morning vs
# evening commute in the taxi trace: 300 vs 3,200 events/sec)
BIMODAL_MINOR_PEAK = 300.0 / 3200.0


def rate_curve(distribution: str, peak_rate: float, seconds: int) -> np.ndarray:
    """Target messages/sec for each second; the maximum equals ``peak_rate``."""
    d = distribution.lower().replace("-", "").replace("_", "")
    s = np.arange(seconds, dtype=float) + 0.5
    if d == "uniform":
        shape = np.ones(seconds)
    elif d == "sawtooth":
        period = max(2, seconds // 3)
        shape = ((np.arange(seconds) % period) + 1) / period
    elif d == "normal":
        mu, sd = seconds / 2.0, max(seconds / 6.0, 0.5)
        shape = np.exp(-0.5 * ((s - mu) / sd) ** 2)
    elif d == "bimodal":
        sd = max(seconds / 14.0, 0.5)
        shape = BIMODAL_MINOR_PEAK * np.exp(-0.5 * ((s - 0.28 * seconds) / sd) ** 2) + np.exp(
            -0.5 * ((s - 0.72 * seconds) / sd) ** 2
        )
    elif d == "burst":
        period = max(5, seconds // 5)
        width = max(1, period // 5)
        shape = np.where((np.arange(seconds) % period) < width, 1.0, 0.1)
    else:
        raise ValueError(f"unknown distribution {distribution!r}; expected one of {DISTRIBUTIONS}")
    if shape.size:
        shape = shape / shape.max()
    return peak_rate * shape


def synthesize(
    distribution: str,
    peak_rate: float,
    duration_ms: int,
    sensor_count: int = 10,
    seed: int = 0,
    fields: Mapping[str, tuple[float, float]] | None = None,
    start_ms: int = 1_420_070_400_000,
    name: str | None = None,
) -> StreamWorkload:
    """Messages whose per-second counts follow ``distribution`` with max ``peak_rate``.

    ``fields`` maps each observation to a (low, high) range; values are
    uniform in range and deterministic for a given seed.
    """
    if peak_rate <= 0:
        raise ValueError("peak rate must be > 0")
    if sensor_count < 1:
        raise ValueError("need at least one sensor")
    fields = dict(fields or {"value": (0.0, 100.0)})
    seconds = max(1, math.ceil(duration_ms / 1000))
    rates = rate_curve(distribution, peak_rate, seconds)
    # the last second may be partial
    tail = (duration_ms - (seconds - 1) * 1000) / 1000.0
    counts = np.rint(rates * np.r_[np.ones(seconds - 1), tail]).astype(int)

    stamps = []
    for sec, n in enumerate(counts):
        if n:
            span = 1000.0 if sec < seconds - 1 else 1000.0 * tail
            stamps.append(start_ms + sec * 1000 + np.floor(np.arange(n) * (span / n)).astype(np.int64))
    ts = np.concatenate(stamps) if stamps else np.empty(0, dtype=np.int64)

    rng = np.random.default_rng(seed)
    values = {f: rng.uniform(lo, hi, size=ts.size) for f, (lo, hi) in fields.items()}
    names = [f"sensor-{k:05d}" for k in range(sensor_count)]
    msgs = [
        Message(i, names[i % sensor_count], int(t), {f: float(values[f][i]) for f in fields}, i)
        for i, t in enumerate(ts.tolist())
    ]
    return StreamWorkload.from_messages(msgs, name=name or f"{distribution}-{int(peak_rate)}")
