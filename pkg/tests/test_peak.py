from __future__ import annotations

import time

import pytest

from streambench.engine import Pattern, TaskDescriptor, make_message
from streambench.errors import NeverStable
from streambench.metrics.peak import BusyWaitTask, find_peak_rate, probe, task_descriptor


def busy(service_ms: float) -> TaskDescriptor:
    return TaskDescriptor("BUSY", Pattern.TRANSFORM, 1, factory=lambda p: BusyWaitTask(**p), params={"service_ms": service_ms})


def test_busy_wait_holds_for_service_time():
    task = BusyWaitTask(service_ms=5)
    t0 = time.perf_counter()
    for i in range(20):
        task.process(make_message("s", i, {}))
    assert time.perf_counter() - t0 >= 0.1


def test_probe_well_below_capacity_is_stable():
    res = probe(busy(1.0), 100, duration_s=1, min_msgs=100, service_ms=1.0)
    assert res.stable, res.reasons
    assert res.achieved_rate == pytest.approx(100, rel=0.05)


def test_probe_above_capacity_is_unstable():
    # capacity is 200 msg/s; offer twice that
    res = probe(busy(5.0), 400, duration_s=1, min_msgs=100, service_ms=5.0)
    assert not res.stable
    assert res.queue_slope > 0 and res.reasons


def test_budget_sets_parallelism_and_merges_params():
    d = task_descriptor(busy(1.0), budget=3, params={"extra": 1})
    assert d.parallelism == 3 and d.params == {"service_ms": 1.0, "extra": 1}
    kal = task_descriptor("KAL", budget=2)
    assert kal.parallelism == 2 and kal.kind == "KAL"


@pytest.mark.slow
def test_never_stable():
    with pytest.raises(NeverStable):
        find_peak_rate(busy(100.0), start_rate=20, min_rate=20, min_msgs=30, duration_s=1, service_ms=100.0)
