"""Filter tasks: Bloom membership and range checks."""

from __future__ import annotations

import math
from typing import Any, Iterable, Mapping, Sequence

from ..engine.message import OBS_TYPE, OBS_VALUE, SENSOR_ID, Message
from ..engine.task import Task
from ..errors import MissingField
from .sketches import BloomFilter

_ABSENT = object()


def bloom_train(whitelist: Iterable[Any], m: int = 1 << 16, k: int = 7, seed: int = 0) -> BloomFilter:
    return BloomFilter.train(whitelist, m, k, seed)


def bloom_filter(state: BloomFilter, msg: Message, id_field: str = SENSOR_ID) -> Message | None:
    key = msg.get(id_field, _ABSENT)
    if key is _ABSENT:
        raise MissingField(f"message {msg.msg_id} has no field {id_field!r}")
    return msg if key in state else None


class BloomFilterTask(Task):
    """Passes messages whose ``id_field`` the filter, trained on ``whitelist``, reports present."""

    def __init__(
        self,
        whitelist: Sequence[Any] = (),
        id_field: str = SENSOR_ID,
        m: int = 1 << 16,
        k: int = 7,
        seed: int = 0,
        **_: Any,
    ):
        self.state = bloom_train(whitelist, m, k, seed)
        self.id_field = id_field
        self.dropped = 0

    def process(self, msg: Message) -> Message | None:
        out = bloom_filter(self.state, msg, self.id_field)
        if out is None:
            self.dropped += 1
        return out


def _is_missing_value(v: Any) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def range_filter(msg: Message, bounds: Mapping[str, Sequence[float]]) -> Message | None:
    """Pass iff every configured field of ``msg`` lies in [lo, hi].

    A flattened message carries one observation, so only that field's
    bound applies, and an observation with no bound passes unchecked. A
    whole record must carry every configured field. A missing reading
    (NaN) passes: it is not an outlier, and repairing it is the
    interpolation task's job.
    """
    obs = msg.fields.get(OBS_TYPE)
    if obs is not None and OBS_VALUE in msg.fields:
        checks = [(obs, msg.fields[OBS_VALUE])] if obs in bounds else []
    else:
        checks = [(name, msg.get(name, _ABSENT)) for name in bounds]
    for name, v in checks:
        if v is _ABSENT:
            return None
        if _is_missing_value(v):
            continue
        lo, hi = bounds[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not lo <= v <= hi:
            return None
    return msg


class RangeFilterTask(Task):
    def __init__(self, bounds: Mapping[str, Sequence[float]] | None = None, **_: Any):
        self.bounds = {k: (float(v[0]), float(v[1])) for k, v in (bounds or {}).items()}
        self.dropped = 0

    def process(self, msg: Message) -> Message | None:
        out = range_filter(msg, self.bounds)
        if out is None:
            self.dropped += 1
        return out
