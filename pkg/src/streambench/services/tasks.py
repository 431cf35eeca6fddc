"""IO tasks over the service backends: blobs, tables, publish-subscribe, archives."""

from __future__ import annotations

import json
import queue
import threading
from pathlib import Path
from typing import Any, Mapping

from ..engine.message import OBS_TYPE, Message, make_message
from ..engine.task import Outputs, SourceTask, Task, TaskContext
from ..errors import RowNotFound, TopicClosed
from .backends import ServiceBackends, Subscription, zip_files

DEFAULT_TABLE = "observations"


class _ServiceTask(Task):
    """Uses ``ctx.services``; without one, a private temporary backend is created."""

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        if ctx.services is None:
            ctx.services = ServiceBackends.temporary()
        self.services: ServiceBackends = ctx.services


def payload_bytes(msg: Message, field: str | None = None) -> bytes:
    """Bytes to store for ``msg``: ``field`` (or ``bytes``) if present, else its fields as JSON."""
    v = msg.fields.get(field or "bytes")
    if isinstance(v, bytes):
        return v
    if isinstance(v, str):
        return v.encode("utf-8")
    doc = {"sensorId": msg.sensor_id, "timestamp": msg.timestamp, **{k: v for k, v in msg.fields.items() if not isinstance(v, bytes)}}
    return json.dumps(doc, sort_keys=True, default=str).encode("utf-8")


# -- blobs --------------------------------------------------------------------------


class BlobUploadTask(_ServiceTask):
    """Stores a blob per message; the name is the ``name`` field or ``<prefix>-<seq>.<ext>``."""

    def __init__(self, prefix: str = "blob", ext: str = "json", field: str | None = None, **_: Any):
        self.prefix = prefix
        self.ext = ext
        self.field = field
        self.seq = 0

    def process(self, msg: Message) -> Message:
        self.seq += 1
        name = msg.fields.get("name")
        if not isinstance(name, str) or not name:
            kind = msg.fields.get("modelType")
            stem = f"{self.prefix}-{kind}" if kind else self.prefix
            name = f"{stem}-{self.ctx.instance}-{self.seq:06d}.{self.ext}"
        data = payload_bytes(msg, self.field)
        self.services.blob.put(name, data)
        return msg.derive({"blob": name, "size": len(data), **({"modelType": msg.fields["modelType"]} if "modelType" in msg.fields else {})})


class BlobDownloadTask(_ServiceTask):
    """Fetches the blob named by the message's ``name_field`` (or the ``blob`` param).

    ``seed_bytes`` (optional) uploads a blob of that size under the param
    name at setup, so a micro-benchmark has something to fetch.
    """

    def __init__(self, blob: str | None = None, seed_bytes: int = 0, name_field: str = "blob", **_: Any):
        self.blob = blob
        self.seed_bytes = int(seed_bytes)
        self.name_field = name_field

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        if self.seed_bytes and self.blob:
            self.services.blob.put(self.blob, bytes(i % 251 for i in range(self.seed_bytes)))

    def process(self, msg: Message) -> Message:
        name = msg.fields.get(self.name_field) or self.blob
        data = self.services.blob.get(str(name))
        return msg.with_fields(blob=name, bytes=data)


# -- tables ---------------------------------------------------------------------------


def row_key(msg: Message) -> str:
    obs = msg.fields.get(OBS_TYPE) or ""
    return f"{msg.timestamp:015d}:{obs}"


class TableInsertTask(_ServiceTask):
    """Upserts each message as a row (pk = sensorId, rk = timestamp:obsType)."""

    def __init__(self, table: str = DEFAULT_TABLE, **_: Any):
        self.table = table

    def process(self, msg: Message) -> Message:
        attrs = {k: v for k, v in msg.fields.items() if not isinstance(v, bytes)}
        attrs["timestamp"] = msg.timestamp
        self.services.table.insert(self.table, msg.sensor_id, row_key(msg), attrs)
        return msg


def preload_table(services: ServiceBackends, table: str, records: Any) -> int:
    n = 0
    for m in records:
        attrs = dict(m.fields)
        attrs["timestamp"] = m.timestamp
        services.table.insert(table, m.sensor_id, row_key(m), attrs)
        n += 1
    return n


class TableLookupTask(_ServiceTask):
    """Exact lookup of (sensorId, ``key_field``) and merge of the row into the message.

    ``on_missing``: "raise" (RowNotFound) or "flag" (pass with ``found=False``).
    """

    def __init__(self, table: str = DEFAULT_TABLE, key_field: str = "rowKey", on_missing: str = "flag", preload: bool = False, **_: Any):
        self.table = table
        self.key_field = key_field
        self.on_missing = on_missing
        self.preload = preload

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        if self.preload and ctx.workload is not None and ctx.instance == 0:
            preload_table(self.services, self.table, ctx.workload.records)

    def process(self, msg: Message) -> Message:
        rk = msg.fields.get(self.key_field)
        if rk is None:
            rk = row_key(msg)
        try:
            row = self.services.table.lookup(self.table, msg.sensor_id, rk)
        except RowNotFound:
            if self.on_missing == "raise":
                raise
            return msg.with_fields(found=False)
        row.pop("timestamp", None)
        return msg.with_fields(**row, found=True)


class TableRangeTask(_ServiceTask):
    """Fetches a batch of rows per message into its ``rows`` field.

    ``mode``:
      * ``range``: partition = sensorId, rowKeys in [``from``, ``to``] from the message;
      * ``scan``: full scan filtered on a non-key attribute (``where_field`` in [lo, hi]);
      * ``since_last``: full scan for rows whose timestamp lies in the next
        ``span_ms`` after the previous call's window (the first window starts
        at the earliest row). Used by the training dataflow.
    ``preload`` fills the table from the run's workload at setup.
    """

    def __init__(
        self,
        table: str = DEFAULT_TABLE,
        mode: str = "since_last",
        span_ms: float = 3_600_000,
        where_field: str | None = None,
        lo: float | None = None,
        hi: float | None = None,
        preload: bool = False,
        **_: Any,
    ):
        if mode not in ("range", "scan", "since_last"):
            raise ValueError(f"unknown table range mode {mode!r}")
        self.table = table
        self.mode = mode
        self.span_ms = float(span_ms)
        self.where_field, self.lo, self.hi = where_field, lo, hi
        self.preload = preload
        self.watermark: float | None = None

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        if self.preload and ctx.workload is not None and ctx.instance == 0:
            preload_table(self.services, self.table, ctx.workload.records)

    def _rows(self, msg: Message) -> list[dict[str, Any]]:
        tbl = self.services.table
        if self.mode == "range":
            hits = tbl.range(self.table, msg.sensor_id, msg.fields.get("from", ""), msg.fields.get("to", "￿"))
        elif self.mode == "scan":
            f, lo, hi = self.where_field, self.lo, self.hi

            def where(row: Mapping[str, Any]) -> bool:
                v = row.get(f) if f else None
                return f is None or (isinstance(v, (int, float)) and (lo is None or v >= lo) and (hi is None or v <= hi))

            hits = tbl.scan(self.table, where)
        else:
            if self.watermark is None:
                all_rows = tbl.scan(self.table)
                if not all_rows:
                    return []
                self.watermark = min(r[2]["timestamp"] for r in all_rows)
            lo_ts, hi_ts = self.watermark, self.watermark + self.span_ms
            self.watermark = hi_ts
            hits = tbl.scan(self.table, lambda r: lo_ts <= r.get("timestamp", -1) < hi_ts)
        return [{"sensorId": pk, **attrs} for pk, _rk, attrs in hits]

    def process(self, msg: Message) -> Message:
        rows = self._rows(msg)
        return msg.derive({"rows": rows, "count": len(rows)})


# -- publish-subscribe -------------------------------------------------------------


class PublishTask(_ServiceTask):
    """Publishes ``field`` (default: the message fields as JSON) to ``topic``; passes the message on."""

    def __init__(self, topic: str = "events", field: str | None = None, **_: Any):
        self.topic = topic
        self.field = field

    def process(self, msg: Message) -> Message:
        payload = msg.fields.get(self.field) if self.field else None
        if payload is None:
            payload = payload_bytes(msg).decode("utf-8")
        self.services.broker.publish(self.topic, payload)
        return msg


class SubscribeTask(_ServiceTask):
    """Broker round trip for micro-benchmarks.

    Each incoming message is published to a per-instance topic; the task's
    own subscription is then polled and every buffered payload is emitted.
    """

    def __init__(self, topic: str = "micro", **_: Any):
        self.topic = topic

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        self.my_topic = f"{self.topic}/{ctx.name}/{ctx.instance}"
        self.sub = self.services.broker.subscribe(self.my_topic)
        self._pending: dict[int, Message] = {}

    def process(self, msg: Message) -> Outputs:
        self._pending[msg.msg_id] = msg
        self.services.broker.publish(self.my_topic, msg.msg_id)
        out = []
        for mid in self.sub.poll():
            src = self._pending.pop(mid)
            out.append(src.with_fields(received=True))
        return out


class SubscribeSource(SourceTask):
    """Emits one message per payload received on ``topic``.

    Auxiliary by default: it does not keep the run alive once the primary
    sources finish, and it drains what is already buffered before stopping.
    """

    def __init__(self, topic: str = "events", auxiliary: bool = True, poll_s: float = 0.01, **_: Any):
        self.topic = topic
        self.auxiliary = auxiliary
        self.poll_s = poll_s

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        if ctx.services is None:
            ctx.services = ServiceBackends.temporary()
        # subscribe before any source starts so no early publication is lost
        self.sub: Subscription = ctx.services.broker.subscribe(self.topic)

    def run(self, emit, stop: threading.Event) -> int:
        n = 0
        while True:
            try:
                payload = self.sub.get(timeout=self.poll_s)
            except queue.Empty:
                if stop.is_set():
                    break
                continue
            except TopicClosed:
                break
            emit(make_message(self.topic, n, {"payload": payload}))
            n += 1
        for payload in self.sub.poll():
            emit(make_message(self.topic, n, {"payload": payload}))
            n += 1
        self.sub.cancel()
        return n


# -- archives ---------------------------------------------------------------------------


class ZipTask(_ServiceTask):
    """Stages each message's ``bytes`` as a file and zips every ``batch`` files.

    ``destination`` is ``local`` (local disk) or ``remote`` (simulated
    shared directory with per-write latency).
    """

    def __init__(self, destination: str = "local", batch: int = 1, **_: Any):
        if destination not in ("local", "remote"):
            raise ValueError("destination must be 'local' or 'remote'")
        self.destination = destination
        self.batch = int(batch)
        self.staged: list[Path] = []
        self.seq = 0

    def setup(self, ctx: TaskContext) -> None:
        super().setup(ctx)
        self.stage_dir = self.services.root / "staging" / f"{ctx.name}-{ctx.instance}"
        self.stage_dir.mkdir(parents=True, exist_ok=True)
        self.dest = self.services.remote if self.destination == "remote" else self.services.local

    def process(self, msg: Message) -> Outputs:
        self.seq += 1
        name = msg.fields.get("name") or f"item-{self.seq:06d}.bin"
        path = self.stage_dir / Path(str(name)).name
        path.write_bytes(payload_bytes(msg))
        self.staged.append(path)
        if len(self.staged) < self.batch:
            return None
        archive_name = f"{self.ctx.name}-{self.ctx.instance}-{self.seq:06d}.zip"
        target = zip_files(self.staged, self.dest, archive_name)
        entries = len(self.staged)
        self.staged = []
        return msg.derive({"name": archive_name, "bytes": target.read_bytes(), "entries": entries})
