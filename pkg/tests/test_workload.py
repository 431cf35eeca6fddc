from __future__ import annotations

import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streambench.engine import make_message
from streambench.errors import EmptyFile, InsufficientSpan, SchemaMismatch
from streambench.workload.ingest import SchemaMap, ingest, write_csv
from streambench.workload.model import ScalingSpec, StreamWorkload
from streambench.workload.replay import replay
from streambench.workload.scaling import DAY_MS, apply_scaling, rate_shape_ks, scale_spatial, scale_temporal
from streambench.workload import senml
from streambench.workload.synth import synthesize

from conftest import T0, workload

MIN_MS = 60_000


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- ingest ------------------------------------------------------------------------


def test_ingest_three_rows_one_sensor(tmp_path):
    p = write(tmp_path, "t.csv", "sensorId,timestamp,temp\na,1000,20.5\na,2000,21\na,3000,22\n")
    w = ingest(p)
    assert w.sensor_count == 1 and len(w) == 3
    assert [m.fields["temp"] for m in w] == [20.5, 21.0, 22.0]
    assert w.native_span_ms == 2000


def test_ingest_senml_two_entries(tmp_path):
    doc = [{"bn": "urn:dev:1", "bt": 1.5, "n": "temp", "v": 20}, {"n": "hum", "v": 40, "t": 1}]
    w = ingest(write(tmp_path, "d.json", json.dumps(doc)))
    assert len(w) == 2
    assert [(m.sensor_id, m.timestamp) for m in w] == [("urn:dev:1", 1500), ("urn:dev:1", 2500)]
    assert [m.fields for m in w] == [{"temp": 20.0}, {"hum": 40.0}]


def test_bad_timestamp_dropped_and_counted(tmp_path):
    p = write(tmp_path, "t.csv", "sensorId,timestamp,v\na,1000,1\na,not-a-time,2\na,3000,3\n")
    w = ingest(p)
    assert len(w) == 2 and w.dropped == 1


def test_iso_timestamps_and_units(tmp_path):
    p = write(tmp_path, "t.csv", "id;ts;v\na;2015-01-01T00:00:00Z;1\na;2015-01-01T00:00:01;2\n")
    w = ingest(p, SchemaMap(sensor_id="id", timestamp="ts", delimiter=";"))
    assert [m.timestamp for m in w] == [T0, T0 + 1000]
    p2 = write(tmp_path, "s.csv", "sensorId,timestamp,v\na,1.5,1\n")
    assert ingest(p2, SchemaMap(timestamp_unit="s")).records[0].timestamp == 1500


def test_empty_cells_are_missing(tmp_path):
    p = write(tmp_path, "t.csv", "sensorId,timestamp,a,b\nx,1,,2\nx,2,,\n")
    w = ingest(p)
    assert len(w) == 2 and w.dropped == 0
    assert math.isnan(w.records[0].fields["a"])
    # a row with no readings at all is kept as a gap for interpolation
    assert all(math.isnan(v) for v in w.records[1].fields.values())


def test_ingest_errors(tmp_path):
    with pytest.raises(SchemaMismatch):
        ingest(write(tmp_path, "a.csv", "id,when,v\na,1,2\n"))
    with pytest.raises(EmptyFile):
        ingest(write(tmp_path, "b.csv", ""))
    with pytest.raises(EmptyFile):
        ingest(write(tmp_path, "c.csv", "sensorId,timestamp,v\n"))
    with pytest.raises(SchemaMismatch):
        ingest(write(tmp_path, "d.json", '{"bn": "x"}'))
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "missing.csv")


def test_csv_round_trip(tmp_path):
    w = synthesize("uniform", 20, 3000, sensor_count=3, seed=1)
    again = ingest(write_csv(w, tmp_path / "w.csv"))
    assert [(m.sensor_id, m.timestamp) for m in again] == [(m.sensor_id, m.timestamp) for m in w]
    assert all(abs(a.fields["value"] - b.fields["value"]) < 1e-9 for a, b in zip(w, again))


@given(st.dictionaries(st.sampled_from(["t", "h", "l"]), st.floats(-1e6, 1e6), min_size=1))
def test_senml_pack_round_trip(fields):
    entries = senml.loads(senml.dumps("dev", 1234, fields))
    ((sid, ts, got),) = senml.group_entries(entries)
    assert (sid, ts) == ("dev", 1234)
    assert got == pytest.approx(fields)


# -- temporal scaling -----------------------------------------------------------------


def test_temporal_identity():
    w = workload(50)
    assert scale_temporal(w, 1) is w


def test_temporal_city_rate():
    # one sensor reporting every 10 s: 6 msg/min -> 180 msg/min at 30x
    w = StreamWorkload.from_messages(make_message("c", T0 + i * 10_000, {"v": i}) for i in range(361))
    per_min = len(w) / (w.native_span_ms / MIN_MS)
    s = scale_temporal(w, 30)
    assert per_min == pytest.approx(6, rel=0.01)
    assert len(s) / (s.native_span_ms / MIN_MS) == pytest.approx(180, rel=0.01)


def test_temporal_uniform_doubles_rate():
    w = synthesize("uniform", 50, 60_000, seed=3)
    s = scale_temporal(w, 2)
    assert s.native_span_ms == pytest.approx(w.native_span_ms / 2, abs=1)
    # recompute from timestamps: every 1 s bin now holds two of the old bins
    old, new = w.rate_profile(), s.rate_profile()
    assert new == [sum(old[i:i + 2]) for i in range(0, len(old), 2)]


@given(st.floats(1, 500), st.lists(st.integers(0, 10**7), min_size=2, max_size=200))
@settings(max_examples=50)
def test_temporal_preserves_order_and_count(factor, offsets):
    w = StreamWorkload.from_messages(make_message("s", T0 + o, {"v": 1}) for o in offsets)
    s = scale_temporal(w, factor)
    assert len(s) == len(w)
    assert list(s.timestamps()) == sorted(s.timestamps())
    assert s.records[0].timestamp == w.records[0].timestamp


def test_temporal_factor_below_one():
    with pytest.raises(ValueError):
        scale_temporal(workload(3), 0.5)
    with pytest.raises(ValueError):
        ScalingSpec(temporal=0.9)


# -- spatial scaling ------------------------------------------------------------------


def test_spatial_identity():
    w = workload(5)
    assert scale_spatial(w, 1) is w


def test_spatial_two_days_one_sensor():
    w = StreamWorkload.from_messages(make_message("m", T0 + h * 3_600_000, {"v": h}) for h in range(48))
    s = scale_spatial(w, 2)
    assert s.sensor_count == 2 and len(s) == 48
    assert sorted({m.sensor_id for m in s}) == ["m~0", "m~1"]
    assert s.native_span_ms < DAY_MS
    day2 = [m for m in s if m.sensor_id == "m~1"]
    assert [m.fields["v"] for m in day2] == [float(h) for h in range(24, 48)]
    assert [m.timestamp - T0 for m in day2] == [h * 3_600_000 for h in range(24)]


def test_spatial_grid_arithmetic():
    # each of 6,435 meters gains 500 remapped identities
    assert 6435 * ScalingSpec(spatial=500).spatial == 3_217_500


def test_spatial_insufficient_span():
    w = StreamWorkload.from_messages(make_message("m", T0 + h * 3_600_000, {}) for h in range(30))
    with pytest.raises(InsufficientSpan):
        scale_spatial(w, 3)


def test_apply_scaling_effective_factor():
    spec = ScalingSpec(30, 30)
    assert spec.effective == 900
    w = StreamWorkload.from_messages(make_message("m", T0 + h * 3_600_000, {}) for h in range(24 * 30))
    s = apply_scaling(w, spec)
    assert s.sensor_count == 30 and len(s) == len(w)
    assert s.native_span_ms == pytest.approx(23 * 3_600_000 / 30, abs=1)


def test_rate_shape_ks_zero_for_compression():
    w = synthesize("bimodal", 100, 60_000, seed=0)
    assert rate_shape_ks(w, scale_temporal(w, 30)) < 0.05
    flat = synthesize("uniform", 100, 60_000, seed=0)
    assert rate_shape_ks(w, flat) > 0.1


# -- replay ---------------------------------------------------------------------------------


def test_replay_ten_at_100_per_sec():
    got = []
    w = workload(10, step_ms=10)
    stats = replay(w, lambda m: got.append(m))
    assert [m.msg_id for m in got] == list(range(10))
    assert stats.emitted == 10
    assert stats.intended_span_ms == pytest.approx(90)
    assert 70 <= stats.achieved_span_ms <= 140


def test_replay_empty():
    stats = replay(StreamWorkload.from_messages([]), lambda m: pytest.fail("emitted"))
    assert stats.emitted == 0


def test_replay_online_temporal_scaling():
    got = []
    stats = replay(workload(10, step_ms=1000), got.append, temporal_factor=100)
    assert stats.intended_span_ms == pytest.approx(90)
    assert len(got) == 10


def test_replay_stop():
    stop = threading.Event()
    stop.set()
    stats = replay(workload(5, step_ms=1000), lambda m: None, stop=stop)
    assert stats.emitted == 0 and stats.stopped_early


def test_replay_sustains_5000_per_sec():
    w = synthesize("uniform", 5000, 10_000, seed=1)
    n = [0]

    def emit(m):
        n[0] += 1

    stats = replay(w, emit)
    assert n[0] == len(w) == 50_000
    assert stats.achieved_rate == pytest.approx(5000, rel=0.05)


# -- synthesize ------------------------------------------------------------------------------


def test_uniform_count():
    w = synthesize("uniform", 500, 10_000, seed=0)
    assert len(w) == pytest.approx(5000, rel=0.01)
    assert max(w.rate_profile()) == 500


def _local_maxima(xs):
    return [i for i in range(1, len(xs) - 1) if xs[i] > xs[i - 1] and xs[i] >= xs[i + 1]]


def test_bimodal_two_peaks():
    prof = synthesize("bimodal", 3200, 100_000, seed=0).rate_profile()
    smooth = np.convolve(prof, np.ones(5) / 5, mode="same")
    peaks = [i for i in _local_maxima(list(smooth)) if smooth[i] > 100]
    assert len(peaks) == 2
    assert max(prof) == 3200


def test_normal_symmetric():
    prof = np.array(synthesize("normal", 1000, 60_000, seed=0).rate_profile(), dtype=float)
    x = np.arange(prof.size) + 0.5
    mu = (prof * x).sum() / prof.sum()
    sd = math.sqrt((prof * (x - mu) ** 2).sum() / prof.sum())
    skew = (prof * (x - mu) ** 3).sum() / prof.sum() / sd**3
    assert abs(skew) < 0.1
    assert len(_local_maxima(list(prof))) == 1


@pytest.mark.parametrize("dist", ["uniform", "sawtooth", "normal", "bimodal", "burst"])
def test_synthesize_peak_and_determinism(dist):
    a = synthesize(dist, 200, 30_000, sensor_count=4, seed=9, fields={"t": (10, 20)})
    b = synthesize(dist, 200, 30_000, sensor_count=4, seed=9, fields={"t": (10, 20)})
    assert max(a.rate_profile()) == 200
    assert [m.fields for m in a] == [m.fields for m in b]
    assert all(10 <= m.fields["t"] <= 20 for m in a)
    assert a.sensor_count == 4


def test_synthesize_rejects_bad_input():
    with pytest.raises(ValueError):
        synthesize("zigzag", 10, 1000)
    with pytest.raises(ValueError):
        synthesize("uniform", 0, 1000)
