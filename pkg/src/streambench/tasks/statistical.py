"""Statistical tasks: accumulate, average, distinct count, Kalman, F2 moment, interpolation.

All state is kept per key, (sensorId, obsType) unless noted, so that the
output for a key does not depend on how keys are spread over instances.
A task's ``field`` names the observation it reads; on flattened messages
that matches ``obsType`` and resolves to ``value``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

from ..engine.message import OBS_TYPE, OBS_VALUE, SENSOR_ID, TIMESTAMP, Message
from ..engine.task import AggregateTask, Outputs, Task
from ..engine.windows import WindowSpec
from ..errors import NonNumericField
from .sketches import AmsSketch, LogLog

_ABSENT = object()


def numeric(msg: Message, name: str) -> float:
    v = msg.get(name, _ABSENT)
    if v is _ABSENT or v is None:
        raise NonNumericField(f"message {msg.msg_id} has no numeric field {name!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NonNumericField(f"field {name!r} of message {msg.msg_id} is not numeric: {v!r}")
    return float(v)


def set_field(msg: Message, name: str, value: Any, **extra: Any) -> Message:
    """Copy of ``msg`` with observation ``name`` replaced (flattened-aware)."""
    fields = dict(msg.fields)
    if name not in fields and fields.get(OBS_TYPE) == name:
        fields[OBS_VALUE] = value
    else:
        fields[name] = value
    fields.update(extra)
    return msg.derive(fields)


def field_names(field: str | None, fields: Sequence[str] | None) -> list[str]:
    if fields:
        return [fields] if isinstance(fields, str) else list(fields)
    return [field or OBS_VALUE]


def resolve_field(msg: Message, names: Sequence[str]) -> str | None:
    """The configured field ``msg`` carries: its ``obsType`` if listed, else the first present."""
    obs = msg.obs_type
    if obs is not None:
        return obs if obs in names or OBS_VALUE in names else None
    for n in names:
        if n in msg.fields:
            return n
    return None


class _FieldTask(Task):
    """Base for tasks reading one of the configured ``fields``; other messages are skipped."""

    def __init__(self, field: str | None = None, fields: Sequence[str] | None = None):
        self.fields = field_names(field, fields)
        self.skipped = 0

    def process(self, msg: Message) -> Outputs:
        name = resolve_field(msg, self.fields)
        if name is None:
            self.skipped += 1
            return None
        return self.apply(msg, name)

    def apply(self, msg: Message, name: str) -> Outputs:
        raise NotImplementedError


# -- accumulate -------------------------------------------------------------------


def batch_row(msg: Message) -> dict[str, Any]:
    return {SENSOR_ID: msg.sensor_id, TIMESTAMP: msg.timestamp, **msg.fields}


class AccumulateTask(AggregateTask):
    """Buffers messages per sensor until ``count`` arrive, then emits them as one batch."""

    def __init__(self, count: int = 30, window: Any = None, **_: Any):
        super().__init__(WindowSpec.from_params(window) if window is not None else WindowSpec("count", int(count)))

    def key(self, msg: Message) -> Hashable:
        return msg.sensor_id

    def aggregate(self, batch: list[Message]) -> Message:
        last = batch[-1]
        return last.derive({"batch": [batch_row(m) for m in batch], "count": len(batch)})


# -- average ------------------------------------------------------------------------


class AverageTask(AggregateTask):
    """Mean of ``field`` over each tumbling count window of a key."""

    def __init__(self, field: str | None = None, window: Any = 10, fields: Sequence[str] | None = None, **_: Any):
        super().__init__(WindowSpec.from_params(window))
        self.fields = field_names(field, fields)

    def key(self, msg: Message) -> Hashable:
        return (msg.sensor_id, resolve_field(msg, self.fields))

    def process(self, msg: Message) -> Outputs:
        name = resolve_field(msg, self.fields)
        if name is None:
            return None
        numeric(msg, name)  # reject before buffering
        return super().process(msg)

    def aggregate(self, batch: list[Message]) -> Message:
        last = batch[-1]
        name = resolve_field(last, self.fields)
        vals = [numeric(m, name) for m in batch]
        present = [v for v in vals if not math.isnan(v)]
        mean = math.fsum(present) / len(present) if present else float("nan")
        return last.derive({OBS_TYPE: name, "avg": mean, "count": len(batch)})


# -- distinct approximate count ----------------------------------------------------


class DistinctCountTask(_FieldTask):
    """LogLog estimate of the distinct values of ``field`` seen so far per key."""

    def __init__(self, field: str | None = None, b: int = 10, seed: int = 0, fields: Sequence[str] | None = None, **_: Any):
        super().__init__(field, fields)
        self.b = b
        self.seed = seed
        self.sketches: dict[Hashable, LogLog] = {}

    def apply(self, msg: Message, name: str) -> Message:
        key = (msg.sensor_id, name)
        sk = self.sketches.get(key)
        if sk is None:
            sk = self.sketches[key] = LogLog(self.b, self.seed)
        sk.add(msg.get(name))
        return msg.with_fields(distinct=sk.estimate())


# -- Kalman ------------------------------------------------------------------------


@dataclass
class KalmanState:
    x: float = 0.0
    p: float = 1.0
    q: float = 1e-5
    r: float = 1e-2

    def step(self, z: float) -> float:
        """One predict/update cycle for measurement ``z``; returns the new estimate."""
        p = self.p + self.q
        denom = p + self.r
        g = p / denom if denom else 1.0
        self.x = self.x + g * (z - self.x)
        self.p = (1.0 - g) * p
        return self.x


class KalmanTask(_FieldTask):
    """Scalar Kalman smoothing of ``field``; the raw reading is kept as ``raw``."""

    def __init__(
        self,
        field: str | None = None,
        q: float = 1e-5,
        r: float = 1e-2,
        x0: float = 0.0,
        p0: float = 1.0,
        fields: Sequence[str] | None = None,
        **_: Any,
    ):
        super().__init__(field, fields)
        self.q, self.r, self.x0, self.p0 = float(q), float(r), float(x0), float(p0)
        self.states: dict[Hashable, KalmanState] = {}

    def apply(self, msg: Message, name: str) -> Message:
        z = numeric(msg, name)
        key = (msg.sensor_id, name)
        st = self.states.get(key)
        if st is None:
            st = self.states[key] = KalmanState(self.x0, self.p0, self.q, self.r)
        # a missing reading leaves the filter untouched
        x = st.x if math.isnan(z) else st.step(z)
        return set_field(msg, name, x, raw=z)


# -- second order moment -----------------------------------------------------------


class SecondMomentTask(_FieldTask):
    """AMS estimate of the second frequency moment of ``field`` per key.

    ``resolution`` (optional) quantizes numeric readings into the discrete
    item domain.
    """

    def __init__(
        self,
        field: str | None = None,
        rows: int = 16,
        buckets: int = 64,
        resolution: float | None = None,
        seed: int = 0,
        fields: Sequence[str] | None = None,
        **_: Any,
    ):
        super().__init__(field, fields)
        self.rows, self.buckets, self.seed = rows, buckets, seed
        self.resolution = resolution
        self.sketches: dict[Hashable, AmsSketch] = {}

    def item(self, v: Any) -> Any:
        if self.resolution and isinstance(v, (int, float)) and not isinstance(v, bool):
            return round(v / self.resolution)
        return v

    def apply(self, msg: Message, name: str) -> Message:
        key = (msg.sensor_id, name)
        sk = self.sketches.get(key)
        if sk is None:
            sk = self.sketches[key] = AmsSketch(self.rows, self.buckets, self.seed)
        sk.add(self.item(msg.get(name)))
        return msg.with_fields(f2=sk.estimate())


# -- interpolation ------------------------------------------------------------------


def _is_gap(v: Any) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


class InterpolateTask(Task):
    """Fills missing readings (None/NaN) with the mean of the last ``window`` values of the key.

    Without any history the message passes unfilled, flagged ``coldStart``.
    """

    def __init__(self, fields: Sequence[str] = (OBS_VALUE,), window: int = 5, **_: Any):
        if isinstance(fields, str):
            fields = [fields]
        self.fields = list(fields)
        self.window = int(window)
        self.history: dict[Hashable, deque[float]] = {}
        self.filled = 0
        self.cold = 0

    def process(self, msg: Message) -> Message:
        out = msg
        for name in self.fields:
            v = msg.get(name, _ABSENT)
            if v is _ABSENT:
                continue
            key = (msg.sensor_id, name)
            hist = self.history.get(key)
            if hist is None:
                hist = self.history[key] = deque(maxlen=self.window)
            if _is_gap(v):
                if hist:
                    self.filled += 1
                    out = set_field(out, name, math.fsum(hist) / len(hist), interpolated=True)
                else:
                    self.cold += 1
                    out = out.with_fields(coldStart=True)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                hist.append(float(v))
        return out
