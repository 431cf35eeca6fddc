"""Resource planning from per-task peak rates.

A CPU-bound task whose expected input rate is below its single-instance
peak gets one core-equivalent running two instances; otherwise it gets
``ceil(rate / peak)`` instances, one core-equivalent each. IO-bound tasks
spend most of their time waiting, so their ``ceil(rate / peak)`` instances
share core-equivalents, several per core.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from ..engine.topology import Pattern, TopologySpec
from ..errors import RateUnknown

IO_INSTANCES_PER_CORE = 4


@dataclass(frozen=True)
class Allocation:
    instances: int
    cores: int
    cpu_bound: bool


def _cpu_bound(kind: str | None) -> bool:
    from ..tasks.catalog import CATALOG

    e = CATALOG.get((kind or "").upper())
    return True if e is None else e.cpu_bound


def _lookup(table: Mapping[str, float], name: str, kind: str | None, what: str) -> float:
    for key in (name, kind):
        if key is not None and key in table:
            return float(table[key])
    raise RateUnknown(f"no {what} for vertex {name!r}" + (f" (task {kind})" if kind and kind != name else ""))


def allocate(rate: float, peak: float, cpu_bound: bool) -> Allocation:
    if peak <= 0:
        raise RateUnknown(f"peak rate must be positive, got {peak}")
    need = max(1, math.ceil(rate / peak))
    if cpu_bound:
        # below peak: an exclusive core and two threads; never fewer than that
        n = max(2, need)
        return Allocation(n, 1 if need <= 1 else n, True)
    return Allocation(need, math.ceil(need / IO_INSTANCES_PER_CORE), False)


def plan_resources(
    spec: TopologySpec,
    expected_rates: Mapping[str, float],
    peak_rates: Mapping[str, float],
) -> dict[str, Allocation]:
    """Allocation per task vertex (sources and sinks are not planned).

    Rates and peaks are looked up by vertex name first, then by task kind.
    Raises RateUnknown if either is missing for some vertex.
    """
    plan = {}
    for v in spec.vertices:
        if v.pattern in (Pattern.SOURCE, Pattern.SINK):
            continue
        rate = _lookup(expected_rates, v.name, v.kind, "expected rate")
        peak = _lookup(peak_rates, v.name, v.kind, "peak rate")
        plan[v.name] = allocate(rate, peak, _cpu_bound(v.kind))
    return plan


def instances(plan: Mapping[str, Allocation]) -> dict[str, int]:
    return {k: a.instances for k, a in plan.items()}


def total_cores(plan: Mapping[str, Allocation]) -> int:
    cpu = sum(a.cores for a in plan.values() if a.cpu_bound)
    io = sum(a.instances for a in plan.values() if not a.cpu_bound)
    return cpu + math.ceil(io / IO_INSTANCES_PER_CORE)


def propagate_rates(spec: TopologySpec, source_rates: Mapping[str, float], gains: Mapping[str, float] | None = None) -> dict[str, float]:
    """Expected input rate of every vertex.

    Each vertex emits ``gain`` (its output/input ratio, default 1) times
    its input rate, and every out-edge carries a full copy.
    """
    gains = gains or {}
    rate_in = {v.name: 0.0 for v in spec.vertices}
    out = {}
    indeg = {v.name: len(spec.in_edges(v.name)) for v in spec.vertices}
    ready = deque(v.name for v in spec.vertices if indeg[v.name] == 0)
    while ready:
        name = ready.popleft()
        v = spec.vertex(name)
        if v.pattern is Pattern.SOURCE:
            out[name] = float(source_rates.get(name, 0.0))
        else:
            out[name] = rate_in[name] * float(gains.get(name, 1.0))
        for e in spec.out_edges(name):
            rate_in[e.dst] += out[name]
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
    return {k: r for k, r in rate_in.items() if spec.vertex(k).pattern is not Pattern.SOURCE}
