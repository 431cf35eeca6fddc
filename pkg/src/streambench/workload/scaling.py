"""Temporal and spatial workload scaling.

Temporal scaling compresses time around the first timestamp, raising the
rate while keeping the shape of the rate distribution. Spatial scaling
cuts the trace into fixed windows (a day by default) and overlays
``factor`` consecutive windows, each under renamed sensor ids, so the
sensor count and the rate grow by ``factor`` while the span shrinks by it.
"""

from __future__ import annotations

import numpy as np

from ..engine.message import Message
from ..errors import InsufficientSpan
from .model import ScalingSpec, StreamWorkload

DAY_MS = 86_400_000


def scale_temporal(workload: StreamWorkload, factor: float) -> StreamWorkload:
    if factor < 1:
        raise ValueError("temporal factor must be >= 1")
    if factor == 1 or not workload.records:
        return workload
    t0 = workload.start_ms
    scaled = [
        Message(m.msg_id, m.sensor_id, t0 + int(round((m.timestamp - t0) / factor)), m.fields, m.cause_id)
        for m in workload.records
    ]
    return StreamWorkload.from_messages(scaled, name=workload.name, dropped=workload.dropped)


def spatial_sensor_id(sensor_id: str, window: int) -> str:
    # any bijection works; suffixing keeps the original id readable
    return f"{sensor_id}~{window}"


def scale_spatial(workload: StreamWorkload, factor: int, window_ms: int = DAY_MS) -> StreamWorkload:
    """Overlay ``factor`` consecutive windows as distinct sensors.

    Window ``w`` of the trace maps to time slot ``w // factor`` under sensor
    ``<id>~<w % factor>``; no record is lost.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError("spatial factor must be an integer >= 1")
    factor = int(factor)
    if factor == 1 or not workload.records:
        return workload
    t0 = workload.start_ms
    windows = (workload.records[-1].timestamp - t0) // window_ms + 1
    if windows < factor:
        raise InsufficientSpan(
            f"trace spans {windows} window(s) of {window_ms} ms; spatial factor {factor} needs {factor}"
        )
    out = []
    for m in workload.records:
        w = (m.timestamp - t0) // window_ms
        slot = w // factor
        out.append(
            Message(
                m.msg_id,
                spatial_sensor_id(m.sensor_id, int(w % factor)),
                m.timestamp - int(w - slot) * window_ms,
                m.fields,
                m.cause_id,
            )
        )
    return StreamWorkload.from_messages(out, name=workload.name, dropped=workload.dropped)


def apply_scaling(workload: StreamWorkload, spec: ScalingSpec, window_ms: int = DAY_MS) -> StreamWorkload:
    """Spatial first (it needs the native windows), then temporal."""
    w = scale_spatial(workload, spec.spatial, window_ms) if spec.spatial > 1 else workload
    return scale_temporal(w, spec.temporal) if spec.temporal > 1 else w


def rate_shape_ks(a: StreamWorkload, b: StreamWorkload, bins: int = 100) -> float:
    """Kolmogorov-Smirnov distance between rate profiles on a normalized time axis.

    Each workload's timeline is mapped onto [0, 1]; the statistic is the
    largest gap between the two cumulative message-count curves over
    ``bins`` equal bins.
    """

    def cdf(w: StreamWorkload) -> np.ndarray:
        ts = w.timestamps().astype(float)
        span = ts[-1] - ts[0]
        pos = np.zeros_like(ts) if span == 0 else (ts - ts[0]) / span
        hist, _ = np.histogram(pos, bins=bins, range=(0.0, 1.0))
        c = np.cumsum(hist).astype(float)
        return c / c[-1]

    if not a.records or not b.records:
        raise ValueError("rate shape needs non-empty workloads")
    return float(np.max(np.abs(cdf(a) - cdf(b))))
