"""Local reference backends for blob storage, table storage and publish-subscribe.

Each backend is safe to share between task instances: operations on one
store serialize behind a lock. Cloud or MQTT adapters would implement the
same methods.
"""

from __future__ import annotations

import bisect
import io
import json
import queue
import shutil
import tempfile
import threading
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Callable, Iterable, Iterator, Mapping

from ..errors import (
    BlobNotFound,
    DestinationUnwritable,
    EmptyBatch,
    FileMissing,
    IoFailure,
    RowNotFound,
    TopicClosed,
)


def _safe_name(name: str) -> PurePosixPath:
    if not name:
        raise ValueError("name must be non-empty")
    p = PurePosixPath(name)
    if p.is_absolute() or ".." in p.parts:
        raise ValueError(f"unsafe name {name!r}")
    return p


class BlobStore:
    """Directory-backed blobs: ``root/<namespace>/<name>``."""

    def __init__(self, root: str | Path, namespace: str = "default"):
        self.root = Path(root)
        self.namespace = namespace
        self._lock = threading.Lock()

    def _path(self, name: str) -> Path:
        return self.root / self.namespace / _safe_name(name)

    def put(self, name: str, data: bytes) -> None:
        path = self._path(name)
        with self._lock:
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_name(path.name + ".part")
                tmp.write_bytes(data)
                tmp.replace(path)
            except OSError as exc:
                raise IoFailure(f"cannot write blob {name!r}: {exc}") from exc

    def get(self, name: str) -> bytes:
        path = self._path(name)
        with self._lock:
            try:
                return path.read_bytes()
            except FileNotFoundError:
                raise BlobNotFound(name) from None

    def names(self) -> list[str]:
        base = self.root / self.namespace
        if not base.exists():
            return []
        return sorted(str(p.relative_to(base).as_posix()) for p in base.rglob("*") if p.is_file() and not p.name.endswith(".part"))


class TableStore:
    """Tables of rows keyed by (partitionKey, rowKey), kept in key order."""

    def __init__(self) -> None:
        self._tables: dict[str, tuple[list[tuple[Any, Any]], dict[tuple[Any, Any], dict[str, Any]]]] = {}
        self._lock = threading.Lock()

    def _table(self, table: str):
        t = self._tables.get(table)
        if t is None:
            t = self._tables[table] = ([], {})
        return t

    def insert(self, table: str, pk: Any, rk: Any, attrs: Mapping[str, Any]) -> None:
        """Upsert one row."""
        if pk in (None, "") or rk in (None, ""):
            raise ValueError("partition and row keys must be non-empty")
        key = (pk, rk)
        with self._lock:
            keys, rows = self._table(table)
            if key not in rows:
                bisect.insort(keys, key)
            rows[key] = dict(attrs)

    def lookup(self, table: str, pk: Any, rk: Any) -> dict[str, Any]:
        with self._lock:
            row = self._tables.get(table, ([], {}))[1].get((pk, rk))
        if row is None:
            raise RowNotFound((table, pk, rk))
        return dict(row)

    def range(self, table: str, pk: Any, from_rk: Any, to_rk: Any) -> list[tuple[Any, Any, dict[str, Any]]]:
        """Rows of partition ``pk`` with from_rk <= rowKey <= to_rk, in key order."""
        with self._lock:
            keys, rows = self._tables.get(table, ([], {}))
            lo = bisect.bisect_left(keys, (pk, from_rk))
            out = []
            for k in keys[lo:]:
                if k[0] != pk or k[1] > to_rk:
                    break
                out.append((k[0], k[1], dict(rows[k])))
            return out

    def scan(self, table: str, where: Callable[[Mapping[str, Any]], bool] | None = None) -> list[tuple[Any, Any, dict[str, Any]]]:
        """Full scan in key order, optionally filtered on attributes (O(N))."""
        with self._lock:
            keys, rows = self._tables.get(table, ([], {}))
            return [(k[0], k[1], dict(rows[k])) for k in keys if where is None or where(rows[k])]

    def count(self, table: str) -> int:
        with self._lock:
            return len(self._tables.get(table, ([], {}))[0])

    def snapshot(self, path: str | Path) -> None:
        """Write every row as one JSON line: {"table", "pk", "rk", "attrs"}."""
        with self._lock, open(path, "w", encoding="utf-8") as fh:
            for name in sorted(self._tables):
                keys, rows = self._tables[name]
                for pk, rk in keys:
                    fh.write(json.dumps({"table": name, "pk": pk, "rk": rk, "attrs": rows[(pk, rk)]}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> TableStore:
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    store.insert(d["table"], d["pk"], d["rk"], d["attrs"])
        return store


_CLOSED = object()


class Subscription:
    """A subscriber's own queue; payloads arrive in publish order."""

    def __init__(self, broker: PubSubBroker, topic: str):
        self.broker = broker
        self.topic = topic
        self._q: queue.Queue = queue.Queue()
        self.closed = False

    def _deliver(self, payload: Any) -> None:
        self._q.put(payload)

    def get(self, timeout: float | None = None) -> Any:
        """Next payload; raises ``queue.Empty`` on timeout and TopicClosed once drained."""
        if self.closed and self._q.empty():
            raise TopicClosed(self.topic)
        item = self._q.get(timeout=timeout)
        if item is _CLOSED:
            self.closed = True
            raise TopicClosed(self.topic)
        return item

    def poll(self) -> list[Any]:
        """Everything buffered so far, without blocking."""
        out = []
        while True:
            try:
                item = self._q.get_nowait()
            except queue.Empty:
                return out
            if item is _CLOSED:
                self.closed = True
                return out
            out.append(item)

    def __iter__(self) -> Iterator[Any]:
        while True:
            try:
                yield self.get()
            except TopicClosed:
                return

    def cancel(self) -> None:
        self.broker._unsubscribe(self)


class PubSubBroker:
    """In-process topic broker with at-subscription delivery semantics."""

    def __init__(self) -> None:
        self._subs: dict[str, list[Subscription]] = {}
        self._closed: set[str] = set()
        self._lock = threading.Lock()

    def subscribe(self, topic: str) -> Subscription:
        with self._lock:
            if topic in self._closed:
                raise TopicClosed(topic)
            sub = Subscription(self, topic)
            self._subs.setdefault(topic, []).append(sub)
            return sub

    def _unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            subs = self._subs.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)

    def subscriber_count(self, topic: str) -> int:
        with self._lock:
            return len(self._subs.get(topic, ()))

    def publish(self, topic: str, payload: Any) -> int:
        """Deliver to every live subscriber; returns how many received it."""
        # delivering under the lock keeps per-topic order across publishers
        with self._lock:
            if topic in self._closed:
                raise TopicClosed(topic)
            subs = list(self._subs.get(topic, ()))
            for s in subs:
                s._deliver(payload)
            return len(subs)

    def close(self, topic: str) -> None:
        with self._lock:
            self._closed.add(topic)
            for s in self._subs.pop(topic, []):
                s._deliver(_CLOSED)


# fixed entry timestamp keeps archives byte-identical across runs
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def zip_bytes(entries: Iterable[tuple[str, bytes]]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, data in entries:
            info = zipfile.ZipInfo(str(_safe_name(name)), date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            info.create_system = 3
            zf.writestr(info, data)
    return buf.getvalue()


@dataclass
class Directory:
    """A destination folder; ``latency_ms`` is injected per write to mimic a remote mount."""

    path: Path
    latency_ms: float = 0.0

    def write(self, name: str, data: bytes) -> Path:
        if self.latency_ms:
            time.sleep(self.latency_ms / 1000.0)
        target = self.path / _safe_name(name)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        except OSError as exc:
            raise DestinationUnwritable(f"cannot write {target}: {exc}") from exc
        return target


def zip_files(files: Iterable[str | Path], destination: Directory, archive_name: str) -> Path:
    """Zip ``files`` (entry order as given, names = basenames) into ``destination``."""
    paths = [Path(f) for f in files]
    if not paths:
        raise EmptyBatch("no files to zip")
    entries = []
    for p in paths:
        try:
            entries.append((p.name, p.read_bytes()))
        except FileNotFoundError:
            raise FileMissing(str(p)) from None
    return destination.write(archive_name, zip_bytes(entries))


@dataclass
class ServiceBackends:
    """The services one run's tasks share, all rooted in one directory."""

    root: Path
    remote_latency_ms: float = 20.0
    blob: BlobStore = field(init=False)
    table: TableStore = field(init=False)
    broker: PubSubBroker = field(init=False)
    local: Directory = field(init=False)
    remote: Directory = field(init=False)
    _owned: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        self.blob = BlobStore(self.root / "blobs")
        self.table = TableStore()
        self.broker = PubSubBroker()
        self.local = Directory(self.root / "local")
        self.remote = Directory(self.root / "remote", self.remote_latency_ms)

    @classmethod
    def temporary(cls, remote_latency_ms: float = 20.0) -> ServiceBackends:
        sb = cls(Path(tempfile.mkdtemp(prefix="streambench-")), remote_latency_ms)
        sb._owned = True
        return sb

    def cleanup(self) -> None:
        if self._owned:
            shutil.rmtree(self.root, ignore_errors=True)
