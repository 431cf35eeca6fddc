"""Peak sustained throughput of a task under a fixed resource budget.

A probe drives ``source -> task -> sink`` at a constant rate. The rate is
stable when, over the trailing half of the probe, the task's input queue
does not grow, per-message latency does not climb, and the source keeps
its schedule. The search ramps the rate up geometrically until a probe is
unstable, then bisects to the requested tolerance and confirms the result.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..engine.message import Message
from ..engine.routing import SHUFFLE, HashBy
from ..engine.runtime import Engine, EngineConfig
from ..engine.task import Task
from ..engine.topology import Edge, Pattern, TaskDescriptor, TopologySpec, define_topology
from ..errors import NeverStable
from .report import MetricsReport

log = logging.getLogger(__name__)

# A probe is unstable when, over its trailing half, any of these holds:
# queue growth above this fraction of the offered rate ...
QUEUE_GROWTH_FRACTION = 0.05
# ... the source's achieved rate below this fraction of the target ...
SOURCE_KEEPUP_FRACTION = 0.95
# ... or median latency rising by more than this many ms (plus 5 service times).
LATENCY_SLACK_MS = 25.0


class BusyWaitTask(Task):
    """Spins on the wall clock for ``service_ms`` per message: a calibrated service time."""

    def __init__(self, service_ms: float = 1.0, **_: Any):
        self.service_s = float(service_ms) / 1000.0

    def process(self, msg: Message) -> Message:
        end = time.perf_counter() + self.service_s
        while time.perf_counter() < end:
            pass
        return msg


@dataclass
class ProbeResult:
    rate: float
    stable: bool
    achieved_rate: float
    queue_slope: float  # msg/sec of input-queue growth over the trailing half
    latency_rise_ms: float
    median_latency_ms: float
    reasons: list[str] = field(default_factory=list)


@dataclass
class PeakResult:
    peak: float
    task: str
    budget: int
    probes: list[ProbeResult]

    @property
    def probe_count(self) -> int:
        return len(self.probes)


def _micro_spec(task: TaskDescriptor, rate: float, count: int, make: Callable | None, seed: int) -> TopologySpec:
    from ..workload.replay import RateSource

    src = TaskDescriptor(
        "source",
        Pattern.SOURCE,
        factory=lambda p: RateSource(rate=rate, count=count, make=make),
    )
    sink = TaskDescriptor("sink", Pattern.SINK)
    mode = HashBy("sensorId") if task.stateful else SHUFFLE
    return define_topology([src, task, sink], [Edge("source", task.name, mode), Edge(task.name, "sink", SHUFFLE)], name=f"peak-{task.name}")


def _trailing_half(xs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    mid = lo + (hi - lo) / 2.0
    return (xs >= mid) & (xs <= hi)


def assess(report: MetricsReport, rate: float, task_name: str, service_ms: float = 0.0) -> ProbeResult:
    """Judge one probe run from its queue samples, latencies and source stats."""
    reasons: list[str] = []
    srcs = report.event_log.source_events
    if not srcs:
        return ProbeResult(rate, False, 0.0, math.nan, math.nan, math.nan, ["no messages emitted"])
    t_first = srcs[0][1]
    t_last = srcs[-1][1]

    # 1. the source kept its schedule
    span_s = (t_last - t_first) / 1000.0
    achieved = (len(srcs) - 1) / span_s if span_s > 0 else math.inf
    if achieved < SOURCE_KEEPUP_FRACTION * rate:
        reasons.append(f"source fell behind ({achieved:.0f} < {rate:.0f} msg/s)")

    # 2. the input queue did not grow over the trailing half
    slope = 0.0
    qs = [(t, sizes.get(task_name, 0)) for t, sizes in report.queue_samples if t_first <= t <= t_last]
    if len(qs) >= 4:
        ts = np.array([t for t, _ in qs], dtype=float)
        sz = np.array([s for _, s in qs], dtype=float)
        sel = _trailing_half(ts, t_first, t_last)
        if sel.sum() >= 3:
            slope = float(np.polyfit(ts[sel] / 1000.0, sz[sel], 1)[0])
            if slope > QUEUE_GROWTH_FRACTION * rate:
                reasons.append(f"input queue growing at {slope:.0f} msg/s")

    # 3. latency did not climb: compare the medians of the last two quarters
    lat = report.latencies
    emit_at = dict(srcs)
    rise = 0.0
    med = math.nan
    if lat:
        pts = np.array([(emit_at[c], v) for _, c, v in lat], dtype=float)
        med = float(np.median(pts[:, 1]))
        q = (t_last - t_first) / 4.0
        third = pts[(pts[:, 0] >= t_first + 2 * q) & (pts[:, 0] < t_first + 3 * q), 1]
        fourth = pts[pts[:, 0] >= t_first + 3 * q, 1]
        if third.size and fourth.size:
            rise = float(np.median(fourth) - np.median(third))
            if rise > LATENCY_SLACK_MS + 5 * service_ms:
                reasons.append(f"latency rising by {rise:.1f} ms")
    return ProbeResult(rate, not reasons, achieved, slope, rise, med, reasons)


def probe(
    task: TaskDescriptor,
    rate: float,
    *,
    duration_s: float = 2.0,
    min_msgs: int = 200,
    make: Callable[[int, np.random.Generator], Message] | None = None,
    workload: Any = None,
    services: Any = None,
    seed: int = 0,
    service_ms: float = 0.0,
) -> ProbeResult:
    count = max(min_msgs, int(math.ceil(rate * duration_s)))
    spec = _micro_spec(task, rate, count, make, seed)
    cfg = EngineConfig(queue_sample_ms=20, utilization_ms=0, seed=seed, interval_ms=1000)
    report = Engine(spec, workload, services=services, config=cfg).run()
    res = assess(report, rate, task.name, service_ms)
    log.info("probe %s @ %.0f msg/s: %s %s", task.name, rate, "stable" if res.stable else "UNSTABLE", "; ".join(res.reasons))
    return res


def task_descriptor(task: str | TaskDescriptor, budget: int = 1, params: Mapping[str, Any] | None = None, workload: Any = None) -> TaskDescriptor:
    """Vertex for ``task`` (a catalog code or a prepared descriptor) with ``budget`` instances."""
    if isinstance(task, TaskDescriptor):
        return TaskDescriptor(
            task.name, task.pattern, budget, task.selectivity, task.stateful, dict(task.params, **(params or {})),
            task.kind, task.factory, task.schema,
        )
    from ..tasks.catalog import entry

    e = entry(task)
    merged = {**e.defaults(workload), **(params or {})}
    return TaskDescriptor(e.code, e.pattern, budget, e.selectivity, e.stateful, merged, kind=e.code)


def micro_input(task: str | TaskDescriptor, workload: Any = None) -> Callable[[int, np.random.Generator], Message] | None:
    """Message maker for probes: random readings reshaped by the task's ``prepare``."""
    if not isinstance(task, str):
        return None
    from ..tasks.catalog import entry

    prep = entry(task).prepare(workload)

    def make(i: int, rng: np.random.Generator) -> Message:
        m = Message(i, f"s{i % 16}", i, {"value": float(rng.uniform(0.0, 100.0))}, i)
        return prep(m) if prep is not None else m

    return make


def find_peak_rate(
    task: str | TaskDescriptor,
    resource_budget: int = 1,
    *,
    params: Mapping[str, Any] | None = None,
    start_rate: float = 100.0,
    min_rate: float = 5.0,
    max_rate: float = 200_000.0,
    tolerance: float = 0.05,
    duration_s: float = 2.0,
    min_msgs: int = 200,
    workload: Any = None,
    services: Any = None,
    seed: int = 0,
    service_ms: float = 0.0,
) -> PeakResult:
    """Largest stable input rate (msg/sec) for ``task`` with ``resource_budget`` instances.

    Raises NeverStable if ``min_rate`` is already unstable.
    """
    desc = task_descriptor(task, resource_budget, params, workload)
    make = micro_input(task, workload)
    probes: list[ProbeResult] = []

    def run(rate: float) -> bool:
        res = probe(desc, rate, duration_s=duration_s, min_msgs=min_msgs, make=make,
                    workload=workload, services=services, seed=seed, service_ms=service_ms)
        probes.append(res)
        return res.stable

    rate = max(min_rate, min(start_rate, max_rate))
    if run(rate):
        lo, hi = rate, None
        while hi is None:
            if lo >= max_rate:
                return PeakResult(lo, desc.name, resource_budget, probes)
            nxt = min(lo * 2.0, max_rate)
            if run(nxt):
                lo = nxt
            else:
                hi = nxt
    else:
        hi, lo = rate, None
        while lo is None:
            nxt = hi / 2.0
            if nxt < min_rate:
                if not run(min_rate):
                    raise NeverStable(f"{desc.name} is unstable even at {min_rate} msg/s")
                nxt = min_rate
                lo = nxt
                break
            if run(nxt):
                lo = nxt
            else:
                hi = nxt

    while (hi - lo) / lo > tolerance:
        mid = (lo + hi) / 2.0
        if run(mid):
            lo = mid
        else:
            hi = mid

    # confirm: near capacity a probe can pass by luck; step down until it repeats
    for _ in range(4):
        if run(lo):
            break
        hi = lo
        lo = lo * (1.0 - tolerance)
        if lo < min_rate:
            raise NeverStable(f"{desc.name} found no repeatably stable rate")
    return PeakResult(lo, desc.name, resource_budget, probes)
