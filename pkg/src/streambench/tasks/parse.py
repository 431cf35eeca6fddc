"""Parse tasks: annotation, CSV to SenML, SenML parsing, XML parsing."""

from __future__ import annotations

import csv
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..engine.message import OBS_TYPE, OBS_VALUE, Message
from ..engine.task import Task
from ..errors import MalformedSenml, MalformedXml, MissingField, SchemaMismatch
from ..workload import senml

SENML_FIELD = "senml"
XML_FIELD = "xml"
ANNOTATED = "annotated"


# -- annotate ---------------------------------------------------------------


def load_lookup_table(path: str | Path, key: str = "sensorId") -> dict[str, dict[str, Any]]:
    """Read a CSV lookup table keyed by ``key``; other columns become metadata."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    table: dict[str, dict[str, Any]] = {}
    for row in rows:
        k = row.pop(key, None)
        if k is not None:
            table[k] = dict(row)
    return table


def annotate(msg: Message, table: Mapping[str, Mapping[str, Any]]) -> Message:
    meta = table.get(msg.sensor_id)
    if meta is None:
        return msg.with_fields(**{ANNOTATED: False})
    return msg.with_fields(**meta, **{ANNOTATED: True})


class AnnotateTask(Task):
    """Appends per-sensor metadata from a lookup table (inline or a CSV file)."""

    def __init__(self, table: Mapping[str, Mapping[str, Any]] | None = None, table_path: str | None = None, **_: Any):
        self.table: dict[str, Mapping[str, Any]] = dict(table or {})
        if table_path:
            self.table.update(load_lookup_table(table_path))

    def process(self, msg: Message) -> Message:
        return annotate(msg, self.table)


# -- CSV to SenML -------------------------------------------------------------


def observation_fields(msg: Message) -> dict[str, Any]:
    """The observations of a message: its field map, with a flattened
    ``obsType``/``value`` pair turned back into ``{obsType: value}``."""
    fields = dict(msg.fields)
    if OBS_TYPE in fields:
        name = fields.pop(OBS_TYPE)
        fields[name] = fields.pop(OBS_VALUE, None)
    return fields


def csv_to_senml(msg: Message, fields: Sequence[str] | None = None) -> Message:
    obs = observation_fields(msg)
    if fields is not None:
        missing = [f for f in fields if f not in obs]
        if missing:
            raise SchemaMismatch(f"message {msg.msg_id} lacks schema fields {missing}")
        obs = {f: obs[f] for f in fields}
    return msg.derive({SENML_FIELD: senml.dumps(msg.sensor_id, msg.timestamp, obs)})


class CsvToSenmlTask(Task):
    def __init__(self, fields: Sequence[str] | None = None, **_: Any):
        self.fields = list(fields) if fields else None

    def process(self, msg: Message) -> Message:
        return csv_to_senml(msg, self.fields)


# -- SenML parse --------------------------------------------------------------


def _decode_entries(payload: Any) -> list[tuple[str, int, str, Any]]:
    if isinstance(payload, (str, bytes)):
        return senml.loads(payload)
    return senml.unpack(payload)


def senml_parse(msg: Message, flatten: bool = True) -> list[Message]:
    """Decode the SenML payload of ``msg``.

    Flattened (the default): one message per observation entry, carrying
    ``obsType`` and ``value``. Otherwise one message per (sensor, time)
    group with every observation as a named field.
    """
    payload = msg.fields.get(SENML_FIELD)
    if payload is None:
        raise MalformedSenml(f"message {msg.msg_id} has no {SENML_FIELD!r} payload")
    entries = _decode_entries(payload)
    if flatten:
        return [msg.derive({OBS_TYPE: name, OBS_VALUE: value}, sensor_id=sid, timestamp=ts) for sid, ts, name, value in entries]
    return [msg.derive(fields, sensor_id=sid, timestamp=ts) for sid, ts, fields in senml.group_entries(entries)]


class SenmlParseTask(Task):
    def __init__(self, flatten: bool = True, **_: Any):
        self.flatten = bool(flatten)
        self.dropped = 0

    def process(self, msg: Message) -> list[Message]:
        out = senml_parse(msg, self.flatten)
        if not out:
            self.dropped += 1
        return out


def encode_senml(msg: Message) -> Message:
    """Source-side helper: wrap a record's fields as a SenML payload."""
    return Message(msg.msg_id, msg.sensor_id, msg.timestamp, {SENML_FIELD: csv_to_senml(msg).fields[SENML_FIELD]}, msg.cause_id)


# -- XML ------------------------------------------------------------------------

# Fixture schema: <reading sensorId=".." timestamp=".."><field>value</field>...</reading>


def xml_write(sensor_id: str, timestamp: int, fields: Mapping[str, Any]) -> str:
    root = ET.Element("reading", {"sensorId": str(sensor_id), "timestamp": str(int(timestamp))})
    for name, value in fields.items():
        ET.SubElement(root, name).text = "" if value is None else repr(value) if isinstance(value, float) else str(value)
    return ET.tostring(root, encoding="unicode")


def _xml_value(text: str | None) -> Any:
    if text is None or text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def xml_parse(msg: Message) -> Message:
    doc = msg.fields.get(XML_FIELD)
    if doc is None:
        raise MissingField(f"message {msg.msg_id} has no {XML_FIELD!r} payload")
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    fields = {child.tag: _xml_value(child.text) for child in root}
    sid = root.get("sensorId", msg.sensor_id)
    ts = root.get("timestamp")
    return msg.derive(fields, sensor_id=sid, timestamp=int(ts) if ts is not None else msg.timestamp)


class XmlParseTask(Task):
    def process(self, msg: Message) -> Message:
        return xml_parse(msg)


def encode_xml(msg: Message) -> Message:
    return Message(msg.msg_id, msg.sensor_id, msg.timestamp, {XML_FIELD: xml_write(msg.sensor_id, msg.timestamp, msg.fields)}, msg.cause_id)


def flatten_all(msgs: Iterable[Message]) -> list[Message]:
    return [m for msg in msgs for m in senml_parse(encode_senml(msg))]
