"""Interfaces between the engine and user task logic."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .message import Message
from .windows import WindowSpec, WindowState, window_accumulate

Emit = Callable[[Message], None]
Outputs = Message | Iterable[Message] | None


@dataclass
class TaskContext:
    """What an instance can see of the run it belongs to."""

    name: str
    instance: int = 0
    parallelism: int = 1
    params: Mapping[str, Any] = field(default_factory=dict)
    services: Any = None
    workload: Any = None
    run_dir: Any = None
    seed: int = 0
    # objects shared by the tasks of one run (e.g. the PRED model registry)
    shared: dict[str, Any] = field(default_factory=dict)
    # set when the engine wants auxiliary sources to wind down
    stop: threading.Event = field(default_factory=threading.Event)
    clock_origin: float = 0.0


class Task:
    """Per-message logic run by exactly one engine worker.

    ``process`` may return ``None``, one message, or an iterable of messages.
    ``flush`` runs once after every upstream instance has finished.
    """

    def setup(self, ctx: TaskContext) -> None:
        self.ctx = ctx

    def process(self, msg: Message) -> Outputs:
        raise NotImplementedError

    def flush(self) -> Outputs:
        return None

    def close(self) -> None:
        pass


class AggregateTask(Task):
    """Tumbling-window aggregate: buffers per window, then calls ``aggregate``.

    Incomplete windows are held, not emitted, when the stream ends.
    """

    window: WindowSpec

    def __init__(self, window: WindowSpec):
        self.window = window
        self.state = WindowState()

    def key(self, msg: Message):
        if not self.window.keyed:
            return None
        return (msg.sensor_id, msg.obs_type)

    def process(self, msg: Message) -> Outputs:
        batch = window_accumulate(self.state, msg, self.window, self.key(msg))
        if batch is None:
            return None
        return self.aggregate(batch)

    def aggregate(self, batch: list[Message]) -> Outputs:
        raise NotImplementedError


class SourceTask:
    """Produces messages until exhausted or until ``stop`` is set.

    Auxiliary sources (e.g. a subscription feeding model updates) do not
    keep a run alive: the engine stops them once every primary source is done.
    """

    auxiliary = False

    def setup(self, ctx: TaskContext) -> None:
        self.ctx = ctx

    def run(self, emit: Emit, stop: threading.Event) -> Any:
        raise NotImplementedError


class FunctionTask(Task):
    """Adapts a plain ``msg -> outputs`` callable."""

    def __init__(self, fn: Callable[[Message], Outputs]):
        self.fn = fn

    def process(self, msg: Message) -> Outputs:
        return self.fn(msg)


class NullSink(Task):
    """Default sink: the engine records arrival; nothing else to do."""

    def process(self, msg: Message) -> Outputs:
        return None
