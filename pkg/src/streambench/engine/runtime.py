"""Threaded executor for a validated :class:`TopologySpec`.

Every task instance is owned by one thread and reads from one bounded FIFO
queue. Producers block when a downstream queue is full (or fail, under the
``fail`` overflow policy). End of stream travels as a marker: an instance
finishes after it has seen one marker from every upstream instance, then
flushes its task and forwards the marker.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from ..errors import ConfigError, QueueOverflowPolicyViolated, TaskPanicked
from ..metrics.eventlog import EventLog
from ..metrics.report import MetricsReport, build_report
from ..metrics.utilization import UtilizationSampler
from .message import Message
from .routing import Router
from .task import NullSink, SourceTask, Task, TaskContext
from .topology import Pattern, TaskDescriptor, TopologySpec

log = logging.getLogger(__name__)

_EOS = object()
_POLL_S = 0.25


class _Aborted(Exception):
    pass


@dataclass
class EngineConfig:
    queue_capacity: int = 1024
    overflow_policy: str = "block"  # "block" | "fail"
    interval_ms: float = 1000.0
    queue_sample_ms: float | None = 100.0
    utilization_ms: float | None = 5000.0
    drain_timeout_s: float = 300.0
    keep_sink_messages: bool = False
    sigma: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.overflow_policy not in ("block", "fail"):
            raise ConfigError(f"overflow policy must be 'block' or 'fail', got {self.overflow_policy!r}")
        if self.queue_capacity < 1:
            raise ConfigError("queue capacity must be positive")


Resolver = Callable[[TaskDescriptor], Any]


def default_resolver(desc: TaskDescriptor) -> Any:
    if desc.factory is not None:
        return desc.factory(desc.params)
    if desc.kind is None:
        if desc.pattern is Pattern.SINK:
            return NullSink()
        if desc.pattern is Pattern.SOURCE:
            from ..workload.replay import ReplaySource

            return ReplaySource(**desc.params)
        raise ConfigError(f"vertex {desc.name!r} names no task kind")
    from ..tasks.catalog import create_task

    return create_task(desc.kind, desc.params)


@dataclass
class _Instance:
    desc: TaskDescriptor
    index: int
    task: Any
    inbox: queue.Queue | None
    expected_eos: int = 0
    outlets: list[tuple[Router, list[queue.Queue]]] = field(default_factory=list)
    log: EventLog = field(default_factory=EventLog)
    n_in: int = 0
    n_out: int = 0
    sink_messages: list[Message] = field(default_factory=list)
    result: Any = None

    @property
    def label(self) -> str:
        return f"{self.desc.name}[{self.index}]"


class Engine:
    """One run of one topology. Use :func:`execute` for the common case."""

    def __init__(
        self,
        spec: TopologySpec,
        workload: Any = None,
        *,
        services: Any = None,
        config: EngineConfig | None = None,
        resolver: Resolver = default_resolver,
        shared: dict[str, Any] | None = None,
        run_dir: str | Path | None = None,
    ):
        self.spec = spec
        self.workload = workload
        self.services = services
        self.config = config or EngineConfig()
        self.resolver = resolver
        self.shared = {} if shared is None else shared
        self.run_dir = run_dir
        self.abort = threading.Event()
        self.stop_primary = threading.Event()
        self.stop_aux = threading.Event()
        self._panic: tuple[str, BaseException] | None = None
        self._panic_lock = threading.Lock()
        self.instances: dict[str, list[_Instance]] = {}
        self.origin = 0.0

    # -- wiring ---------------------------------------------------------------

    def _build(self) -> None:
        cap = self.config.queue_capacity
        for v in self.spec.vertices:
            insts = []
            for i in range(v.parallelism):
                task = self.resolver(v)
                inbox = None if v.pattern is Pattern.SOURCE else queue.Queue(maxsize=cap)
                insts.append(_Instance(v, i, task, inbox))
            self.instances[v.name] = insts
        for e in self.spec.edges:
            ups = self.instances[e.src]
            downs = self.instances[e.dst]
            for d in downs:
                d.expected_eos += len(ups)
            for u in ups:
                u.outlets.append((Router(e.mode, len(downs)), [d.inbox for d in downs]))
        for name, insts in self.instances.items():
            for inst in insts:
                ctx = TaskContext(
                    name=name,
                    instance=inst.index,
                    parallelism=inst.desc.parallelism,
                    params=inst.desc.params,
                    services=self.services,
                    workload=self.workload,
                    run_dir=self.run_dir,
                    seed=self.config.seed + 7919 * inst.index,
                    shared=self.shared,
                    stop=self.stop_aux if getattr(inst.task, "auxiliary", False) else self.stop_primary,
                    clock_origin=self.origin,
                )
                inst.task.setup(ctx)

    # -- queue primitives -----------------------------------------------------

    def _put(self, q: queue.Queue, item: Any) -> None:
        if self.config.overflow_policy == "fail":
            try:
                q.put_nowait(item)
            except queue.Full:
                raise QueueOverflowPolicyViolated("downstream queue full under 'fail' policy") from None
            return
        while True:
            try:
                q.put(item, timeout=_POLL_S)
                return
            except queue.Full:
                if self.abort.is_set():
                    raise _Aborted from None

    def _put_eos(self, q: queue.Queue) -> None:
        # end-of-stream markers always block, whatever the overflow policy
        while True:
            try:
                q.put(_EOS, timeout=_POLL_S)
                return
            except queue.Full:
                if self.abort.is_set():
                    raise _Aborted from None

    def _get(self, q: queue.Queue) -> Any:
        while True:
            try:
                return q.get(timeout=_POLL_S)
            except queue.Empty:
                if self.abort.is_set():
                    raise _Aborted from None

    def _now(self) -> float:
        return (time.perf_counter() - self.origin) * 1000.0

    def _emitter(self, inst: _Instance) -> Callable[[Message], None]:
        outlets = inst.outlets
        put = self._put

        def emit(msg: Message) -> None:
            inst.n_out += 1
            for router, chans in outlets:
                for i in router.select(msg):
                    put(chans[i], msg)

        return emit

    def _finish(self, inst: _Instance) -> None:
        for _, chans in inst.outlets:
            for q in chans:
                self._put_eos(q)

    def _record_panic(self, inst: _Instance, exc: BaseException) -> None:
        with self._panic_lock:
            if self._panic is None:
                self._panic = (inst.desc.name, exc)
                log.error("task %s failed: %r", inst.label, exc)
        self.abort.set()

    # -- workers ----------------------------------------------------------------

    def _run_source(self, inst: _Instance, ordinal: int) -> None:
        base = (ordinal + 1) << 40
        seq = 0
        send = self._emitter(inst)
        record = inst.log.source_events.append
        now = self._now

        def emit(m: Message) -> None:
            nonlocal seq
            sid = base | seq
            seq += 1
            record((sid, now()))
            send(Message(sid, m.sensor_id, m.timestamp, m.fields, sid))

        task: SourceTask = inst.task
        stop = self.stop_aux if task.auxiliary else self.stop_primary
        try:
            inst.result = task.run(emit, stop)
            self._finish(inst)
        except _Aborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - reported as TaskPanicked
            self._record_panic(inst, exc)

    def _run_worker(self, inst: _Instance) -> None:
        task: Task = inst.task
        emit = self._emitter(inst)
        is_sink = inst.desc.pattern is Pattern.SINK
        keep = self.config.keep_sink_messages
        record = inst.log.sink_events.append
        now = self._now
        get = self._get
        q = inst.inbox
        eos = 0

        def emit_all(out: Any) -> None:
            if out is None:
                return
            if isinstance(out, Message):
                emit(out)
                return
            for m in out:
                emit(m)

        try:
            while True:
                item = get(q)
                if item is _EOS:
                    eos += 1
                    if eos >= inst.expected_eos:
                        break
                    continue
                inst.n_in += 1
                if is_sink:
                    record((item.msg_id, item.cause_id, now()))
                    if keep:
                        inst.sink_messages.append(item)
                emit_all(task.process(item))
            emit_all(task.flush())
            task.close()
            self._finish(inst)
        except _Aborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - reported as TaskPanicked
            self._record_panic(inst, exc)

    # -- monitoring ---------------------------------------------------------------

    def _sample_queues(self, done: threading.Event, out: list) -> None:
        period = self.config.queue_sample_ms / 1000.0
        watched = [
            (name, [i.inbox for i in insts])
            for name, insts in self.instances.items()
            if insts[0].inbox is not None
        ]
        while not done.wait(period):
            out.append((self._now(), {name: sum(q.qsize() for q in qs) for name, qs in watched}))

    # -- run --------------------------------------------------------------------------

    def run(self, duration_limit_ms: float | None = None) -> MetricsReport:
        self.origin = time.perf_counter()
        self._build()
        cfg = self.config

        workers, primary, aux = [], [], []
        ordinal = 0
        for v in self.spec.vertices:
            for inst in self.instances[v.name]:
                if v.pattern is Pattern.SOURCE:
                    t = threading.Thread(target=self._run_source, args=(inst, ordinal), name=inst.label, daemon=True)
                    ordinal += 1
                    (aux if getattr(inst.task, "auxiliary", False) else primary).append(t)
                else:
                    t = threading.Thread(target=self._run_worker, args=(inst,), name=inst.label, daemon=True)
                    workers.append(t)

        sampler = None
        if cfg.utilization_ms:
            sampler = UtilizationSampler(cfg.utilization_ms, clock_origin=self.origin).start()
        monitor_done = threading.Event()
        queue_samples: list = []
        monitor = None
        if cfg.queue_sample_ms:
            monitor = threading.Thread(target=self._sample_queues, args=(monitor_done, queue_samples), daemon=True)
            monitor.start()

        for t in workers + aux + primary:
            t.start()

        deadline = None if duration_limit_ms is None else time.perf_counter() + duration_limit_ms / 1000.0
        for t in primary:
            while t.is_alive() and not self.abort.is_set():
                t.join(timeout=0.05)
                if deadline is not None and time.perf_counter() >= deadline:
                    self.stop_primary.set()
        sources_done_ms = self._now()
        self.stop_aux.set()

        drain_deadline = time.perf_counter() + cfg.drain_timeout_s
        partial = False
        for t in aux + workers:
            while t.is_alive():
                t.join(timeout=0.05)
                if self.abort.is_set():
                    break
                if time.perf_counter() > drain_deadline:
                    log.warning("drain timed out; aborting run")
                    partial = True
                    self.abort.set()
                    break
        if self.abort.is_set():
            for t in aux + workers + primary:
                t.join(timeout=2 * _POLL_S + 0.5)
        end_ms = self._now()
        monitor_done.set()
        if monitor is not None:
            monitor.join(timeout=2)
        util = sampler.stop() if sampler is not None else []

        if self._panic is not None:
            name, exc = self._panic
            raise TaskPanicked(name, exc) from exc

        all_insts = [i for insts in self.instances.values() for i in insts]
        merged = EventLog.merge(i.log for i in all_insts)
        counts = {
            name: {"in": sum(i.n_in for i in insts), "out": sum(i.n_out for i in insts)}
            for name, insts in self.instances.items()
        }
        sink_msgs = [m for i in all_insts if i.desc.pattern is Pattern.SINK for m in i.sink_messages]
        source_results = {
            i.label: i.result for i in all_insts if i.desc.pattern is Pattern.SOURCE and i.result is not None
        }
        meta = {
            "topology": self.spec.name,
            "workload": getattr(self.workload, "name", None),
            "duration_ms": end_ms,
            "sources_done_ms": sources_done_ms,
        }
        if source_results:
            meta["source_results"] = source_results
        return build_report(
            merged,
            interval_ms=cfg.interval_ms,
            sigma=cfg.sigma,
            utilization=util,
            end_ms=end_ms,
            run_meta=meta,
            queue_samples=queue_samples,
            vertex_counts=counts,
            sink_messages=sink_msgs,
            partial=partial or (sampler is not None and sampler.partial),
        )


def execute(
    spec: TopologySpec,
    workload: Any = None,
    duration_limit_ms: float | None = None,
    **kwargs: Any,
) -> MetricsReport:
    """Run ``spec`` over ``workload`` until sources are exhausted and queues drained."""
    return Engine(spec, workload, **kwargs).run(duration_limit_ms)


def run_tasks_serially(tasks: Iterable[Task], messages: Iterable[Message]) -> list[Message]:
    """Push messages through a chain of tasks in-line (no threads); for tests and tooling."""
    stream = list(messages)
    for task in tasks:
        nxt: list[Message] = []
        for m in stream:
            out = task.process(m)
            if out is None:
                continue
            nxt.extend([out] if isinstance(out, Message) else out)
        tail = task.flush()
        if tail is not None:
            nxt.extend([tail] if isinstance(tail, Message) else tail)
        stream = nxt
    return stream
