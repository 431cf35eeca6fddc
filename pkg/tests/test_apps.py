from __future__ import annotations

import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from streambench.apps import datasets
from streambench.apps.builders import bloom_whitelist, build_app, train_schedule
from streambench.apps.config import load_parallelism_plan, loads_config, parse_duration_ms, preset
from streambench.apps.planner import allocate, plan_resources, propagate_rates, total_cores
from streambench.apps.run import run_app
from streambench.engine import EngineConfig
from streambench.errors import ConfigIncomplete, RateUnknown
from streambench.tasks.predictive import CLASS_LABELS
from streambench.workload.model import StreamWorkload
from streambench.workload.scaling import apply_scaling

QUIET = EngineConfig(utilization_ms=None, queue_sample_ms=None, keep_sink_messages=True)


def city_slice(hours: float = 2.0) -> StreamWorkload:
    w = datasets.city()
    end = w.start_ms + hours * datasets.HOUR_MS
    return StreamWorkload.from_messages([m for m in w.records if m.timestamp < end], name="CITY")


def city_config(temporal: float = 3600, **options: str):
    base = preset("city").with_scaling(temporal=temporal)
    return dataclasses.replace(base, options={**base.options, **options})


def vertex_kinds(spec) -> set[str]:
    return {v.kind for v in spec.vertices}


# -- configs and builders ------------------------------------------------------------


def test_fit_etl_has_no_bloom_filter():
    w = datasets.fit()
    spec = build_app("etl", preset("fit"), w)
    assert "BLF" not in vertex_kinds(spec) and "INP" in vertex_kinds(spec)


def test_taxi_etl_has_no_interpolation():
    spec = build_app("etl", preset("taxi"), datasets.taxi())
    assert "INP" not in vertex_kinds(spec) and "BLF" in vertex_kinds(spec)


@pytest.mark.parametrize("app", ["train", "pred"])
def test_grid_rejects_model_apps(app):
    with pytest.raises(ConfigIncomplete):
        build_app(app, preset("grid"), datasets.grid())


def test_grid_targets_energy_consumed():
    cfg = preset("grid")
    for task in ("AVG", "DAC", "SLR"):
        assert cfg.require("stats", task).inputs == ("energyConsumed",)


def test_city_distinct_count_on_temperature():
    assert preset("city").require("stats", "DAC").inputs == ("temperature",)


def test_missing_entry_is_incomplete():
    cfg = loads_config("[workload]\nname = X\n[etl]\nRGF = a\n")
    with pytest.raises(ConfigIncomplete):
        cfg.check("etl")
    with pytest.raises(ConfigIncomplete):
        build_app("nope", cfg)


def test_model_needs_target():
    text = "[workload]\nname = X\n[train]\nMLT = a, b\nDTT = a -> b\n"
    with pytest.raises(ConfigIncomplete):
        build_app("train", loads_config(text), city_slice(0.5))


def test_durations():
    assert parse_duration_ms("2h") == 7_200_000
    assert parse_duration_ms("1min") == 60_000
    assert parse_duration_ms("250") == 250
    with pytest.raises(ConfigIncomplete):
        parse_duration_ms("soon")


def test_parallelism_plan_file(tmp_path):
    p = tmp_path / "plan.txt"
    p.write_text("AVG = 4\nKAL = 2\n")
    assert load_parallelism_plan(p) == {"AVG": 4, "KAL": 2}
    spec = build_app("stats", preset("city").with_parallelism({"AVG": 4}), city_slice(0.5))
    assert spec.vertex("AVG").parallelism == 4


def test_bloom_whitelist_excludes_rogues():
    w = datasets.city()
    wl = bloom_whitelist(w, "*-rogue*")
    assert wl and not any(s.endswith(datasets.ROGUE_SUFFIX) for s in wl)
    assert len(wl) < len({m.sensor_id for m in w.records})


def test_train_schedule_covers_extent():
    cfg = city_config(train_span="1h")
    span, period, firings = train_schedule(cfg, apply_scaling(city_slice(2), cfg.scaling))
    assert span == pytest.approx(datasets.HOUR_MS / 3600) and period == span and firings == 2


# -- runs -----------------------------------------------------------------------------


def test_etl_fork_doubles_surviving_observations():
    run = run_app("etl", city_config(temporal=36000), city_slice(1), engine_config=QUIET)
    # every observation that survives the filters reaches the sink on both branches
    assert run.report.sink_count % 2 == 0 and run.report.sink_count > 0
    assert run.counters["BLF"]["dropped"] > 0


def test_two_firings_store_two_models_of_each_kind():
    run = run_app("train", city_config(train_span="1h"), city_slice(2), engine_config=QUIET)
    names = run.services.blob.names()
    assert sum(n.startswith("model-MLR") for n in names) == 2
    assert sum(n.startswith("model-DTC") for n in names) == 2
    assert run.report.source_count == 2


def test_prediction_hot_swaps_models():
    run = run_app("pred", city_config(train_span="1h"), city_slice(2), engine_config=QUIET)
    assert run.shared["model_updates"] == 2
    assert run.companion is not None and run.companion.report.sink_count == 4  # two models per firing
    classes = {m.fields["class"] for m in run.report.sink_messages if "class" in m.fields}
    assert classes and classes <= set(CLASS_LABELS)


# -- planner ----------------------------------------------------------------------------


def test_below_peak_gets_two_instances_one_core():
    a = allocate(100, 1000, cpu_bound=True)
    assert (a.instances, a.cores) == (2, 1)


def test_above_peak_scales_out():
    a = allocate(2500, 1000, cpu_bound=True)
    assert (a.instances, a.cores) == (3, 3)


def test_io_tasks_colocated():
    a = allocate(600, 300, cpu_bound=False)
    assert (a.instances, a.cores) == (2, 1)


@given(st.floats(1, 1e6), st.floats(1, 1e6), st.floats(1, 1e6), st.booleans())
def test_allocation_monotone_in_rate(r1, r2, peak, cpu):
    lo, hi = sorted((r1, r2))
    assert allocate(lo, peak, cpu).instances <= allocate(hi, peak, cpu).instances
    assert allocate(hi, peak, cpu).instances >= math.ceil(hi / peak)


def test_bad_peak():
    with pytest.raises(RateUnknown):
        allocate(10, 0, True)


def test_plan_for_stats_app():
    spec = build_app("stats", preset("city"), city_slice(0.5))
    rates = propagate_rates(spec, {"source": 100}, gains={"SML": 5})
    assert rates["SML"] == 100 and rates["AVG"] == 500 and rates["KAL"] == 500
    # ACC merges AVG, SLR and DAC outputs
    assert rates["ACC"] == 1500
    plan = plan_resources(spec, rates, {k: 1000.0 for k in rates})
    assert plan["ACC"].instances == 2 and plan["ABU"].cpu_bound is False
    assert total_cores(plan) >= len([a for a in plan.values() if a.cpu_bound])
    with pytest.raises(RateUnknown):
        plan_resources(spec, rates, {})


# -- fixtures ---------------------------------------------------------------------------


def test_bundled_fixtures_match_generators(tmp_path):
    for path in datasets.write_fixtures(tmp_path):
        assert path.read_bytes() == datasets.fixture_path(path.stem).read_bytes()
