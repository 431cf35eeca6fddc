"""The record type that flows on every edge of a dataflow."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Mapping

SENSOR_ID = "sensorId"
TIMESTAMP = "timestamp"
# Keys of a flattened single-observation message, as produced by a flat map
# parse: {"obsType": <field name>, "value": <observation>}.
OBS_TYPE = "obsType"
OBS_VALUE = "value"

INTRINSIC_KEYS = frozenset({SENSOR_ID, TIMESTAMP})

# Derived messages draw ids from a range disjoint from source ids, which the
# engine stamps per source as (ordinal << 40 | seq).
_DERIVED_BASE = 1 << 52
_derived_ids = itertools.count(_DERIVED_BASE)

_MISSING = object()


def next_derived_id() -> int:
    return next(_derived_ids)


@dataclass(frozen=True, slots=True)
class Message:
    """Timestamped, keyed record of named observation fields.

    ``cause_id`` is the id of the source message this one causally derives
    from; source messages carry their own id there.
    """

    msg_id: int
    sensor_id: str
    timestamp: int
    fields: Mapping[str, Any] = field(default_factory=dict)
    cause_id: int | None = None

    def derive(self, fields: Mapping[str, Any] | None = None, **changes: Any) -> Message:
        """New message with a fresh id that inherits this message's cause."""
        return Message(
            msg_id=next_derived_id(),
            sensor_id=changes.get("sensor_id", self.sensor_id),
            timestamp=changes.get("timestamp", self.timestamp),
            fields=self.fields if fields is None else fields,
            cause_id=changes.get("cause_id", self.cause_id),
        )

    def with_fields(self, **extra: Any) -> Message:
        merged = dict(self.fields)
        merged.update(extra)
        return self.derive(merged)

    def get(self, name: str, default: Any = None) -> Any:
        """Look up a field by name.

        Resolves the intrinsic keys ``sensorId``/``timestamp`` and, for
        flattened observation messages, ``name`` matching ``obsType``.
        """
        v = self.fields.get(name, _MISSING)
        if v is not _MISSING:
            return v
        if name == SENSOR_ID:
            return self.sensor_id
        if name == TIMESTAMP:
            return self.timestamp
        if self.fields.get(OBS_TYPE) == name:
            return self.fields.get(OBS_VALUE, default)
        return default

    def has(self, name: str) -> bool:
        return self.get(name, _MISSING) is not _MISSING

    @property
    def obs_type(self) -> str | None:
        return self.fields.get(OBS_TYPE)


def make_message(
    sensor_id: str,
    timestamp: int,
    fields: Mapping[str, Any],
    msg_id: int | None = None,
    cause_id: int | None = None,
) -> Message:
    if msg_id is None:
        msg_id = next_derived_id()
    return Message(msg_id, sensor_id, int(timestamp), dict(fields), cause_id)


def state_key(msg: Message) -> tuple[str, str | None]:
    """Per-key state index used by stateful tasks: (sensorId, obsType)."""
    return (msg.sensor_id, msg.fields.get(OBS_TYPE))
