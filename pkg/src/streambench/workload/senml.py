"""SenML (JSON serialization) packing and unpacking.

A pack is a list of records. Base fields (``bn``, ``bt``, ``bu``, ``bv``)
apply to the record that carries them and every later record until
overridden. Times are seconds in SenML and milliseconds everywhere else in
this package. The sensor id is the base name verbatim; the entry name is
the observation field. A missing observation is written as ``"v": null``
and read back as NaN.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping

from ..errors import MalformedSenml


def pack(sensor_id: str, timestamp_ms: int, fields: Mapping[str, Any]) -> list[dict[str, Any]]:
    records: list[dict[str, Any]] = []
    for i, (name, value) in enumerate(fields.items()):
        rec: dict[str, Any] = {}
        if i == 0:
            rec["bn"] = sensor_id
            rec["bt"] = timestamp_ms / 1000.0
        rec["n"] = name
        if value is None or (isinstance(value, float) and value != value):
            rec["v"] = None  # missing observation
        elif isinstance(value, bool):
            rec["vb"] = value
        elif isinstance(value, (int, float)):
            rec["v"] = value
        else:
            rec["vs"] = str(value)
        records.append(rec)
    if not records:
        records.append({"bn": sensor_id, "bt": timestamp_ms / 1000.0})
    return records


def dumps(sensor_id: str, timestamp_ms: int, fields: Mapping[str, Any]) -> str:
    return json.dumps(pack(sensor_id, timestamp_ms, fields), separators=(",", ":"))


def unpack(records: Any) -> list[tuple[str, int, str, Any]]:
    """Resolve a pack into (sensorId, timestamp_ms, field, value) entries."""
    if not isinstance(records, list):
        raise MalformedSenml("a SenML pack must be a JSON array")
    out = []
    base_name: str | None = None
    base_time = 0.0
    base_value = 0.0
    for rec in records:
        if not isinstance(rec, dict):
            raise MalformedSenml(f"SenML record must be an object, got {type(rec).__name__}")
        if "bn" in rec:
            base_name = str(rec["bn"])
        if "bt" in rec:
            base_time = _num(rec["bt"], "bt")
        if "bv" in rec:
            base_value = _num(rec["bv"], "bv")
        if "n" not in rec and not any(k in rec for k in ("v", "vs", "vb", "vd")):
            continue  # base-only record
        if base_name is None:
            raise MalformedSenml("entry without a base name")
        name = rec.get("n")
        if not isinstance(name, str) or not name:
            raise MalformedSenml(f"entry without a name: {rec}")
        if "v" in rec and rec["v"] is None:
            value: Any = float("nan")
        elif "v" in rec:
            value = base_value + _num(rec["v"], "v")
        elif "vs" in rec:
            value = str(rec["vs"])
        elif "vb" in rec:
            value = bool(rec["vb"])
        elif "vd" in rec:
            value = str(rec["vd"])
        else:
            raise MalformedSenml(f"entry {name!r} has no value")
        t = base_time + (_num(rec["t"], "t") if "t" in rec else 0.0)
        out.append((base_name, int(round(t * 1000.0)), name, value))
    return out


def loads(text: str | bytes) -> list[tuple[str, int, str, Any]]:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedSenml(f"invalid SenML JSON: {exc}") from exc
    return unpack(doc)


def group_entries(entries: Iterable[tuple[str, int, str, Any]]) -> list[tuple[str, int, dict[str, Any]]]:
    """Merge consecutive entries sharing (sensorId, time) into one field map."""
    grouped: list[tuple[str, int, dict[str, Any]]] = []
    for sid, ts, name, value in entries:
        if grouped and grouped[-1][0] == sid and grouped[-1][1] == ts and name not in grouped[-1][2]:
            grouped[-1][2][name] = value
        else:
            grouped.append((sid, ts, {name: value}))
    return grouped


def _num(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedSenml(f"SenML {what} must be numeric, got {v!r}")
    return float(v)
