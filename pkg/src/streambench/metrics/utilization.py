"""CPU and memory sampling of the benchmark process and its children.

There are no VMs here, so the "host" is this process tree. CPU is reported
normalized to one core (a thread spinning on one core reads ~100%).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Iterator

from ..errors import SamplerUnavailable

try:
    import psutil
except ImportError:  # pragma: no cover - psutil is a declared dependency
    psutil = None


@dataclass(frozen=True)
class UtilizationSample:
    ts_ms: float
    cpu_pct: float
    mem_pct: float


class _ProcessTree:
    def __init__(self) -> None:
        if psutil is None:
            raise SamplerUnavailable("psutil is not installed")
        try:
            self.root = psutil.Process()
            self.root.cpu_percent(None)
        except (psutil.Error, OSError) as exc:
            raise SamplerUnavailable(str(exc)) from exc
        self._children: dict[int, psutil.Process] = {}

    def sample(self) -> tuple[float, float]:
        cpu = self.root.cpu_percent(None)
        mem = self.root.memory_percent()
        for child in self.root.children(recursive=True):
            proc = self._children.get(child.pid)
            try:
                if proc is None:
                    # first reading primes the counter
                    self._children[child.pid] = child
                    child.cpu_percent(None)
                    continue
                cpu += proc.cpu_percent(None)
                mem += proc.memory_percent()
            except psutil.Error:
                self._children.pop(child.pid, None)
        return cpu, mem


def sample_utilization(
    interval_ms: float = 5000.0,
    stop: threading.Event | None = None,
    clock_origin: float | None = None,
) -> Iterator[UtilizationSample]:
    """Yield one sample per interval until ``stop`` is set.

    Raises :class:`SamplerUnavailable` on platforms psutil cannot read.
    """
    tree = _ProcessTree()
    origin = time.perf_counter() if clock_origin is None else clock_origin
    period = interval_ms / 1000.0
    deadline = time.perf_counter() + period
    stop = stop or threading.Event()
    while not stop.wait(max(0.0, deadline - time.perf_counter())):
        cpu, mem = tree.sample()
        yield UtilizationSample((time.perf_counter() - origin) * 1000.0, cpu, mem)
        deadline += period


class UtilizationSampler:
    """Background thread collecting :func:`sample_utilization` output."""

    def __init__(self, interval_ms: float = 5000.0, clock_origin: float | None = None):
        self.interval_ms = interval_ms
        self.clock_origin = clock_origin
        self.samples: list[UtilizationSample] = []
        self.partial = False
        self.error: str | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> UtilizationSampler:
        try:
            gen = sample_utilization(self.interval_ms, self._stop, self.clock_origin)
            # probe the platform before spawning the thread
            _ProcessTree()
        except SamplerUnavailable as exc:
            self.partial, self.error = True, str(exc)
            return self

        def loop() -> None:
            try:
                for s in gen:
                    self.samples.append(s)
            except Exception as exc:  # sampling must never take the run down
                self.partial, self.error = True, repr(exc)

        self._thread = threading.Thread(target=loop, name="utilization-sampler", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> list[UtilizationSample]:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
        return self.samples
