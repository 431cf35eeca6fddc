"""Topologies of the micro-benchmark and the four applications.

Builders are pure: they read an :class:`AppConfig` (and, where a task
needs data-derived parameters such as a whitelist, the workload) and
return a validated :class:`TopologySpec`. Vertex names are task codes, so
a parallelism plan can address them directly.
"""

from __future__ import annotations

import fnmatch
import math
import zlib
from typing import Any, Mapping, Sequence

from ..engine.routing import SHUFFLE, HashBy
from ..engine.topology import Edge, Pattern, TaskDescriptor, TopologySpec, define_topology
from ..errors import ConfigIncomplete
from ..metrics.peak import task_descriptor
from ..tasks.catalog import entry
from ..workload.model import StreamWorkload
from .config import AppConfig, parse_duration_ms

BY_SENSOR = HashBy("sensorId")
MODEL_TOPIC = "models"
PREDICTION_TOPIC = "predictions"
ETL_TOPIC = "etl"
_WHOLE = {"kind": "count", "width": 1, "keyed": False}  # trainers fed whole batches


def _source(prepare: Any = None, **params: Any) -> TaskDescriptor:
    if prepare is not None:
        params["prepare"] = prepare
    return TaskDescriptor("source", Pattern.SOURCE, params=params)


def _sink(name: str = "sink") -> TaskDescriptor:
    return TaskDescriptor(name, Pattern.SINK)


def _task(code: str, config: AppConfig | None = None, name: str | None = None, **params: Any) -> TaskDescriptor:
    """Vertex running catalog task ``code`` with the catalog's declared pattern and state."""
    name = name or code
    par = config.parallelism.get(name, 1) if config is not None else 1
    e = entry(code)
    return TaskDescriptor(name, e.pattern, par, e.selectivity, e.stateful, params, kind=code)


def _aux(code: str, pattern: Pattern, config: AppConfig, name: str | None = None, **params: Any) -> TaskDescriptor:
    name = name or code
    return TaskDescriptor(name, pattern, config.parallelism.get(name, 1), params=params, kind=code)


# -- micro --------------------------------------------------------------------------


def build_micro(
    task: str,
    params: Mapping[str, Any] | None = None,
    parallelism: int = 1,
    workload: StreamWorkload | None = None,
    temporal: float = 1.0,
) -> TopologySpec:
    """``source -> task -> sink``; the source reshapes records into the task's input form."""
    e = entry(task)
    desc = task_descriptor(e.code, parallelism, params, workload)
    mode = BY_SENSOR if desc.stateful else SHUFFLE
    src = _source(e.prepare(workload), temporal=temporal)
    return define_topology(
        [src, desc, _sink()],
        [Edge("source", desc.name, mode), Edge(desc.name, "sink", SHUFFLE)],
        name=f"micro-{e.code}",
    )


# -- data-derived parameters --------------------------------------------------------


def bloom_whitelist(workload: StreamWorkload, reject: str | None) -> list[str]:
    """Sensor ids of ``workload`` except those matching the glob ``reject``."""
    ids = sorted({m.sensor_id for m in workload.records})
    return [s for s in ids if not (reject and fnmatch.fnmatchcase(s, reject))]


def annotation_table(workload: StreamWorkload, attributes: Sequence[str]) -> dict[str, dict[str, str]]:
    """Synthetic metadata: a stable pseudo-random value per (sensor, attribute)."""
    table = {}
    for sid in sorted({m.sensor_id for m in workload.records}):
        table[sid] = {a: f"{a}-{zlib.crc32(f'{sid}/{a}'.encode()) % 5}" for a in attributes}
    return table


def _bounds(config: AppConfig, fields: Sequence[str]) -> dict[str, list[float]]:
    missing = [f for f in fields if f not in config.ranges]
    if missing:
        raise ConfigIncomplete(f"{config.workload}: [range] lacks {', '.join(missing)}")
    return {f: list(config.ranges[f]) for f in fields}


def _need_workload(workload: StreamWorkload | None, app: str) -> StreamWorkload:
    if workload is None:
        raise ConfigIncomplete(f"{app.upper()} needs the workload to derive its lookup tables")
    return workload


# -- ETL ----------------------------------------------------------------------------


def build_etl(config: AppConfig, workload: StreamWorkload | None = None) -> TopologySpec:
    """Parse, clean, annotate and fork to publish and archive.

    BLF and INP are left out where the workload marks them N/A. The fork
    follows annotation: one branch converts back to SenML and publishes,
    the other inserts into the table.
    """
    config.check("etl")
    rgf = config.require("etl", "RGF")
    blf = config.mapping("etl", "BLF")
    inp = config.mapping("etl", "INP")
    ann = config.require("etl", "ANN")
    w = _need_workload(workload, "etl")

    chain: list[tuple[TaskDescriptor, Any]] = [
        (_task("SML", config, flatten=True), SHUFFLE),
        (_task("RGF", config, bounds=_bounds(config, rgf.inputs)), SHUFFLE),
    ]
    if blf is not None:
        wl = bloom_whitelist(w, config.option("bloom_reject"))
        chain.append((_task("BLF", config, whitelist=wl, id_field=blf.inputs[0]), SHUFFLE))
    if inp is not None:
        chain.append((_task("INP", config, fields=list(inp.inputs), window=int(config.option("interpolate_window", 5))), BY_SENSOR))
    chain.append((_task("ANN", config, table=annotation_table(w, ann.inputs)), SHUFFLE))

    from ..tasks.parse import encode_senml

    vertices = [_source(encode_senml)]
    edges = []
    prev = "source"
    for desc, mode in chain:
        vertices.append(desc)
        edges.append(Edge(prev, desc.name, mode))
        prev = desc.name
    vertices += [
        _task("C2S", config),
        _task("MQP", config, topic=ETL_TOPIC, field="senml"),
        _task("ATI", config, table="observations"),
        _sink(),
    ]
    edges += [
        Edge(prev, "C2S", SHUFFLE),
        Edge(prev, "ATI", SHUFFLE),
        Edge("C2S", "MQP", SHUFFLE),
        Edge("MQP", "sink", SHUFFLE),
        Edge("ATI", "sink", SHUFFLE),
    ]
    return define_topology(vertices, edges, name=f"etl-{config.workload}")


# -- STATS --------------------------------------------------------------------------


def build_stats(config: AppConfig, workload: StreamWorkload | None = None) -> TopologySpec:
    """Three statistics in parallel, then per-sensor plots zipped and stored."""
    config.check("stats")
    avg = config.require("stats", "AVG")
    slr = config.require("stats", "SLR")
    dac = config.mapping("stats", "DAC")

    from ..tasks.parse import encode_senml

    vertices = [
        _source(encode_senml),
        _task("SML", config, flatten=True),
        _task("AVG", config, fields=list(avg.inputs), window={"kind": "count", "width": 10, "keyed": True}),
        _task("KAL", config, fields=list(slr.inputs)),
        _task("SLR", config, fields=list(slr.inputs), window=int(config.option("slr_window", 16)),
              horizon=int(config.option("slr_horizon", 4))),
    ]
    edges = [
        Edge("source", "SML", SHUFFLE),
        Edge("SML", "AVG", BY_SENSOR),
        Edge("SML", "KAL", BY_SENSOR),
        Edge("KAL", "SLR", BY_SENSOR),
        Edge("AVG", "ACC", BY_SENSOR),
        Edge("SLR", "ACC", BY_SENSOR),
    ]
    if dac is not None:
        vertices.append(_task("DAC", config, fields=list(dac.inputs)))
        edges += [Edge("SML", "DAC", BY_SENSOR), Edge("DAC", "ACC", BY_SENSOR)]
    count = int(config.option("accumulate", 30))
    vertices += [
        _task("ACC", config, window={"kind": "count", "width": count, "keyed": True}),
        _task("PLT", config),
        _task("LZP", config, destination="local"),
        _task("ABU", config, prefix="stats", ext="zip"),
        _sink(),
    ]
    edges += [
        Edge("ACC", "PLT", SHUFFLE),
        Edge("PLT", "LZP", SHUFFLE),
        Edge("LZP", "ABU", SHUFFLE),
        Edge("ABU", "sink", SHUFFLE),
    ]
    return define_topology(vertices, edges, name=f"stats-{config.workload}")


# -- TRAIN --------------------------------------------------------------------------


def _predictive(config: AppConfig, app: str) -> None:
    config.check(app)
    for code in REQUIRED_MODELS[app]:
        m = config.require(app, code)
        if m.target is None:
            raise ConfigIncomplete(f"{config.workload}: [{app}] {code} needs 'inputs -> target'")


REQUIRED_MODELS = {"train": ("MLT", "DTT"), "pred": ("MLR", "DTC")}


def train_schedule(config: AppConfig, workload: StreamWorkload) -> tuple[float, float, int]:
    """(span_ms, period_ms, firings) of the training timer, in the scaled workload's time.

    Each firing trains on ``train_span`` of original time. Scaling
    compresses that span by the temporal factor, and the timer fires once
    per span, so that every firing sees fresh data.
    """
    span = parse_duration_ms(config.option("train_span", "1h")) / config.scaling.temporal
    if "train_period" in config.options:
        period = parse_duration_ms(config.options["train_period"])
    else:
        period = span
    extent = (workload.records[-1].timestamp - workload.start_ms) if workload.records else 0
    firings = max(1, math.ceil((extent + 1) / span))
    return span, period, firings


def build_train(config: AppConfig, workload: StreamWorkload | None = None) -> TopologySpec:
    """Timer-driven retraining from the table store; models are stored and announced."""
    _predictive(config, "train")
    mlt = config.require("train", "MLT")
    dtt = config.require("train", "DTT")
    w = _need_workload(workload, "train")
    span, period, firings = train_schedule(config, w)

    timer = TaskDescriptor("timer", Pattern.SOURCE, params={"period_ms": period, "count": firings}, kind="TIMER")
    vertices = [
        timer,
        _task("ATR", config, mode="since_last", span_ms=span, preload=True),
        _task("MLT", config, predictors=list(mlt.inputs), target=mlt.target, window=_WHOLE),
        _aux("LBL", Pattern.TRANSFORM, config, target=dtt.target),
        _task("DTT", config, features=list(dtt.inputs), target=dtt.target, window=_WHOLE),
        _task("ABU", config, prefix="model", ext="json"),
        _task("MQP", config, topic=MODEL_TOPIC, field="blob"),
        _sink(),
    ]
    edges = [
        Edge("timer", "ATR", SHUFFLE),
        Edge("ATR", "MLT", SHUFFLE),
        Edge("ATR", "LBL", SHUFFLE),
        Edge("LBL", "DTT", SHUFFLE),
        Edge("MLT", "ABU", SHUFFLE),
        Edge("DTT", "ABU", SHUFFLE),
        Edge("ABU", "MQP", SHUFFLE),
        Edge("MQP", "sink", SHUFFLE),
    ]
    return define_topology(vertices, edges, name=f"train-{config.workload}")


# -- PRED ---------------------------------------------------------------------------


def build_pred(config: AppConfig, workload: StreamWorkload | None = None) -> TopologySpec:
    """Classification and regression on the stream; models arrive on a side channel."""
    _predictive(config, "pred")
    avg = config.require("pred", "AVG")
    mlr = config.require("pred", "MLR")

    from ..tasks.parse import encode_senml

    vertices = [
        _aux("SUB", Pattern.SOURCE, config, name="models", topic=MODEL_TOPIC),
        _task("ABD", config, name_field="payload"),
        _aux("MUP", Pattern.TRANSFORM, config),
        _source(encode_senml),
        _task("SML", config, flatten=False),
        _task("DTC", config),
        _task("MLR", config),
        _aux("RES", Pattern.TRANSFORM, config, target=avg.inputs[0] if avg.inputs else mlr.target,
             window=int(config.option("residual_window", 10))),
        _task("MQP", config, topic=PREDICTION_TOPIC),
        _sink(),
    ]
    edges = [
        Edge("models", "ABD", SHUFFLE),
        Edge("ABD", "MUP", SHUFFLE),
        # the side channel shares the sink, which keeps the graph connected
        Edge("MUP", "sink", SHUFFLE),
        Edge("source", "SML", SHUFFLE),
        Edge("SML", "DTC", SHUFFLE),
        Edge("SML", "MLR", SHUFFLE),
        Edge("MLR", "RES", BY_SENSOR),
        Edge("DTC", "MQP", SHUFFLE),
        Edge("RES", "MQP", SHUFFLE),
        Edge("MQP", "sink", SHUFFLE),
    ]
    return define_topology(vertices, edges, name=f"pred-{config.workload}")


BUILDERS = {"etl": build_etl, "stats": build_stats, "train": build_train, "pred": build_pred}


def build_app(app: str, config: AppConfig, workload: StreamWorkload | None = None) -> TopologySpec:
    try:
        builder = BUILDERS[app.lower()]
    except KeyError:
        raise ConfigIncomplete(f"unknown application {app!r}; expected one of {', '.join(BUILDERS)}") from None
    return builder(config, workload)
