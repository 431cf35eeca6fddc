"""Load CSV and SenML-JSON time-series files into a :class:`StreamWorkload`."""

from __future__ import annotations

import csv
import math
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from ..engine.message import Message
from ..errors import EmptyFile, MalformedSenml, SchemaMismatch
from . import senml
from .model import StreamWorkload

log = logging.getLogger(__name__)

_UNIT_MS = {"ms": 1.0, "s": 1000.0, "us": 0.001}


@dataclass(frozen=True)
class SchemaMap:
    """Which columns hold the sensor id, timestamp and observations.

    ``fields=None`` takes every remaining column (CSV) or every entry name
    (SenML). ``timestamp_unit`` applies to numeric timestamps; ISO-8601
    strings are also accepted (naive ones are read as UTC).
    """

    sensor_id: str = "sensorId"
    timestamp: str = "timestamp"
    fields: Sequence[str] | None = None
    delimiter: str = ","
    timestamp_unit: str = "ms"
    format: str | None = None  # "csv" | "senml"; None = by file suffix

    def __post_init__(self) -> None:
        if self.timestamp_unit not in _UNIT_MS:
            raise ValueError(f"timestamp_unit must be one of {sorted(_UNIT_MS)}")


def parse_timestamp(raw: str, unit: str = "ms") -> int | None:
    text = raw.strip()
    if not text:
        return None
    try:
        return int(round(float(text) * _UNIT_MS[unit]))
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1000))


# value of an empty cell
MISSING = float("nan")


def parse_value(raw: str) -> Any:
    text = raw.strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        return text


def ingest(path: str | Path, schema: SchemaMap | None = None, name: str | None = None) -> StreamWorkload:
    """Parse every row; rows with unparseable timestamps are dropped and counted."""
    path = Path(path)
    schema = schema or SchemaMap()
    fmt = schema.format or ("senml" if path.suffix.lower() in (".json", ".senml", ".jsonl") else "csv")
    if not path.exists():
        raise FileNotFoundError(path)
    if fmt == "senml":
        messages, dropped = _ingest_senml(path, schema)
    else:
        messages, dropped = _ingest_csv(path, schema)
    if dropped:
        log.warning("%s: dropped %d rows", path.name, dropped)
    return StreamWorkload.from_messages(messages, name=name or path.stem, dropped=dropped)


def _ingest_csv(path: Path, schema: SchemaMap) -> tuple[list[Message], int]:
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        missing = [c for c in (schema.sensor_id, schema.timestamp) if c not in header]
        if schema.fields is not None:
            missing += [c for c in schema.fields if c not in header]
        if missing:
            raise SchemaMismatch(f"{path.name}: columns {missing} not in header {header}")
        sid_i = header.index(schema.sensor_id)
        ts_i = header.index(schema.timestamp)
        wanted = schema.fields if schema.fields is not None else [
            h for h in header if h not in (schema.sensor_id, schema.timestamp)
        ]
        cols = [(f, header.index(f)) for f in wanted]

        messages: list[Message] = []
        dropped = rows = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            rows += 1
            if len(row) < len(header):
                dropped += 1
                continue
            ts = parse_timestamp(row[ts_i], schema.timestamp_unit)
            if ts is None:
                dropped += 1
                continue
            # an empty cell is a missing observation; a row of them is a reporting gap
            fields = {}
            for f, i in cols:
                v = parse_value(row[i])
                fields[f] = MISSING if v is None else v
            messages.append(Message(len(messages), row[sid_i].strip(), ts, fields))
    if rows == 0:
        raise EmptyFile(f"{path} has a header but no data rows")
    return messages, dropped


def _ingest_senml(path: Path, schema: SchemaMap) -> tuple[list[Message], int]:
    text = path.read_text()
    if not text.strip():
        raise EmptyFile(f"{path} is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        # JSON lines, one pack per line
        try:
            packs = [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path.name}: not SenML JSON: {exc}") from exc
    else:
        if not isinstance(doc, list):
            raise SchemaMismatch(f"{path.name}: top level must be a SenML array")
        packs = doc if doc and isinstance(doc[0], list) else [doc]

    wanted = None if schema.fields is None else set(schema.fields)
    messages: list[Message] = []
    dropped = 0
    for p in packs:
        try:
            entries = senml.unpack(p)
        except MalformedSenml as exc:
            raise SchemaMismatch(f"{path.name}: {exc}") from exc
        for sid, ts, fields in senml.group_entries(entries):
            if wanted is not None:
                fields = {k: v for k, v in fields.items() if k in wanted}
            if not fields:
                dropped += 1
                continue
            messages.append(Message(len(messages), sid, ts, fields))
    if not messages and not dropped:
        raise EmptyFile(f"{path} holds no SenML entries")
    return messages, dropped


def _cell(v: Any) -> Any:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else v


def write_csv(workload: StreamWorkload, path: str | Path, fields: Sequence[str] | None = None) -> Path:
    """Write a workload back out in the CSV layout :func:`ingest` reads."""
    path = Path(path)
    names = list(fields) if fields is not None else workload.field_names()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensorId", "timestamp", *names])
        for m in workload.records:
            w.writerow([m.sensor_id, m.timestamp, *(_cell(m.fields.get(f)) for f in names)])
    return path
