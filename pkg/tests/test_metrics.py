from __future__ import annotations

import math
import random
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from streambench.errors import DivisionGuard, OrphanSinkEvent
from streambench.metrics import (
    EventLog,
    build_report,
    compute_jitter,
    compute_latency,
    compute_throughput,
    latency_stats,
    sample_utilization,
    write_report,
)
from streambench.metrics.utilization import UtilizationSampler

CSVS = ["latency.csv", "throughput.csv", "input_rate.csv", "jitter.csv", "utilization.csv"]


def log_with_delays(delays):
    log = EventLog()
    for i, d in enumerate(delays):
        log.record_source(i, 10.0 * i)
        log.record_sink(1000 + i, i, 10.0 * i + d)
    return log


# -- latency ----------------------------------------------------------------------------


def test_single_message_latency():
    log = EventLog()
    log.record_source(1, 0.0)
    log.record_sink(7, 1, 5.0)
    assert compute_latency(log).median == 5.0


def test_fan_out_inherits_source_timestamp():
    log = EventLog()
    log.record_source(1, 2.0)
    log.record_sink(10, 1, 5.0)
    log.record_sink(11, 1, 9.0)
    st_ = compute_latency(log)
    assert (st_.min, st_.max, st_.count) == (3.0, 7.0, 2)


def test_quartiles_of_arithmetic_sequence():
    st_ = compute_latency(log_with_delays(range(1, 101)))
    # type-7 rule: position (n-1)p, so Q1 at 24.75 -> 25.75
    assert st_.q1 == pytest.approx(25.75, abs=1e-12)
    assert st_.median == pytest.approx(50.5, abs=1e-12)
    assert st_.q3 == pytest.approx(75.25, abs=1e-12)
    assert (st_.min, st_.max) == (1.0, 100.0)


def test_orphan_sink_event():
    log = EventLog()
    log.record_sink(5, 99, 1.0)
    with pytest.raises(OrphanSinkEvent):
        compute_latency(log)


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=60), st.randoms())
def test_latency_permutation_invariant(delays, rnd):
    log = log_with_delays(delays)
    shuffled = EventLog(list(log.source_events), list(log.sink_events))
    rnd.shuffle(shuffled.source_events)
    rnd.shuffle(shuffled.sink_events)
    assert compute_latency(log) == compute_latency(shuffled)


def test_whiskers_within_fences():
    st_ = latency_stats([1, 2, 3, 4, 5, 100])
    assert st_.whisker_high == 5 and st_.max == 100


# -- throughput ---------------------------------------------------------------------------


def test_uniform_second():
    log = EventLog(sink_events=[(i, i, i * 10.0) for i in range(100)])
    assert compute_throughput(log, 1000) == [100.0]


def test_empty_log():
    assert compute_throughput(EventLog(), 1000) == []


def test_bursty():
    ts = [10.0 + i for i in range(50)] + [2010.0 + i for i in range(50)]
    log = EventLog(sink_events=[(i, i, t) for i, t in enumerate(ts)])
    assert compute_throughput(log, 1000) == [50.0, 0.0, 50.0]


def test_interval_scaling():
    log = EventLog(sink_events=[(i, i, i * 10.0) for i in range(100)])
    assert compute_throughput(log, 500) == [100.0, 100.0]


# -- jitter ----------------------------------------------------------------------------------


def test_jitter_ideal():
    assert compute_jitter([50, 100, 25], [100, 200, 50], 0.5, 80) == [0.0, 0.0, 0.0]


def test_jitter_hand_values():
    assert compute_jitter([90], [100], 1.0, 100)[0] == pytest.approx(-0.1, abs=1e-12)
    assert compute_jitter([120], [200], 0.5, 200)[0] == pytest.approx(0.2, abs=1e-12)


def test_jitter_guards():
    with pytest.raises(DivisionGuard):
        compute_jitter([1], [1], 1.0, 0.0)
    with pytest.raises(ValueError):
        compute_jitter([1, 2], [1], 1.0, 1.0)


@given(st.lists(st.tuples(st.floats(0, 1e4), st.floats(0, 1e4)), min_size=1, max_size=40), st.floats(0.01, 100))
def test_jitter_matches_formula(pairs, sigma):
    out = [o for o, _ in pairs]
    inp = [i for _, i in pairs]
    mean_in = float(np.mean(inp)) or 1.0
    got = compute_jitter(out, inp, sigma, mean_in)
    want = [(o - sigma * i) / (sigma * mean_in) for o, i in pairs]
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


# -- report -------------------------------------------------------------------------------------


def test_build_report_series_aligned():
    rep = build_report(log_with_delays([5.0] * 300), interval_ms=1000)
    assert len(rep.jitter) == len(rep.throughput) == len(rep.input_rate)
    assert rep.sigma == 1.0
    assert rep.long_term_input_rate == pytest.approx(np.mean(rep.input_rate))


def test_write_report_files(tmp_path):
    rep = build_report(log_with_delays(range(1, 51)))
    names = {p.name for p in write_report(rep, tmp_path / "out")}
    assert set(CSVS) <= names and "summary.txt" in names
    assert any(n.endswith(".svg") for n in names)
    head = (tmp_path / "out" / "latency.csv").read_text().splitlines()
    assert head[0] == "msgId,causeId,latencyMs" and len(head) == 51
    assert (tmp_path / "out" / "jitter.csv").read_text().startswith("intervalStartMs,J\n")
    assert (tmp_path / "out" / "latency.svg").read_text().lstrip().startswith(("<?xml", "<svg"))


def test_empty_jitter_header_only(tmp_path):
    write_report(build_report(EventLog()), tmp_path)
    assert (tmp_path / "jitter.csv").read_text() == "intervalStartMs,J\n"


def test_rewrite_is_byte_identical(tmp_path):
    rep = build_report(log_with_delays([random.Random(3).uniform(0, 9) for _ in range(200)]))
    write_report(rep, tmp_path / "a")
    write_report(rep, tmp_path / "b")
    for name in CSVS + ["summary.txt"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_summary_mentions_quartiles():
    text = build_report(log_with_delays(range(1, 101))).summary()
    assert "median=50.500" in text and "q1=25.750" in text


# -- utilization ------------------------------------------------------------------------------------


def test_idle_process_near_zero():
    samples = sample_utilization(100)
    next(samples)
    s = next(samples)
    assert s.cpu_pct < 50 and 0 < s.mem_pct < 100


def test_busy_spin_reads_one_core():
    sampler = UtilizationSampler(250).start()
    end = time.perf_counter() + 1.1
    while time.perf_counter() < end:
        pass
    samples = sampler.stop()
    assert samples and not sampler.partial
    busy = [s.cpu_pct for s in samples[1:]] or [samples[0].cpu_pct]
    assert np.median(busy) > 70


def test_sample_count_follows_interval():
    sampler = UtilizationSampler(100).start()
    time.sleep(1.25)
    n = len(sampler.stop())
    # 1.25 s at 100 ms -> 12 samples, give or take scheduling
    assert 11 <= n <= 13
