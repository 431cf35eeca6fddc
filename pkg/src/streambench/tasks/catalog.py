"""Registry of the micro-benchmark tasks and their declared properties.

Each entry records the task's category, its pattern and selectivity as
declared for the benchmark, whether it keeps state, a factory, and how to
derive its micro-benchmark input (``prepare``) and default parameters from
a workload.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..engine.message import Message
from ..engine.task import Task
from ..engine.topology import Pattern
from ..errors import UnknownTask
from ..services import tasks as io
from ..workload.replay import TimerSource
from . import filters, parse, predictive, statistical, visual


@dataclass(frozen=True)
class CatalogEntry:
    code: str
    name: str
    category: str
    # as declared in the benchmark's task table
    declared_pattern: str
    selectivity: str
    stateful: bool
    factory: Callable[..., Any]
    # vertex pattern used when the task runs between a source and a sink
    pattern: Pattern = Pattern.TRANSFORM
    cpu_bound: bool = True
    prepare: Callable[[Any], Callable[[Message], Message] | None] = field(default=lambda w: None)
    defaults: Callable[[Any], dict[str, Any]] = field(default=lambda w: {})

    def create(self, params: Mapping[str, Any] | None = None) -> Any:
        return self.factory(**dict(params or {}))


# -- helpers deriving micro inputs from a workload ------------------------------------


def numeric_fields(workload: Any) -> list[str]:
    if workload is None or not workload.records:
        return ["value"]
    first = workload.records[0].fields
    names = [k for k, v in first.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    return names or ["value"]


def _primary(w: Any) -> str:
    return numeric_fields(w)[0]


def _sensors(w: Any) -> list[str]:
    if w is None:
        return [f"s{i}" for i in range(16)]
    return sorted({m.sensor_id for m in w.records})


def _with_gaps(name: str, every: int = 10) -> Callable[[Message], Message]:
    def prep(m: Message) -> Message:
        fields = dict(m.fields)
        if m.msg_id % every == every - 1:
            fields[name] = float("nan")
        return Message(m.msg_id, m.sensor_id, m.timestamp, fields, m.cause_id)

    return prep


def _regression_row(m: Message, f: str) -> dict[str, float]:
    v = float(m.fields.get(f, 0.0) or 0.0)
    x2 = float((m.msg_id * 37) % 100)
    noise = ((m.msg_id * 7919) % 1000) / 1000.0 - 0.5
    return {"x1": v, "x2": x2, "y": 1.0 + 2.0 * v + 3.0 * x2 + noise}


def _regression_prep(w: Any) -> Callable[[Message], Message]:
    f = _primary(w)

    def prep(m: Message) -> Message:
        return Message(m.msg_id, m.sensor_id, m.timestamp, _regression_row(m, f), m.cause_id)

    return prep


def _bootstrap_rows(w: Any, n: int = 200) -> list[dict[str, float]]:
    f = _primary(w)
    if w is None or not w.records:
        rng = np.random.default_rng(0)
        msgs = [Message(i, "s", i, {f: float(rng.uniform(0, 100))}, i) for i in range(n)]
    else:
        msgs = list(w.records[:n])
    return [_regression_row(m, f) for m in msgs]


def _mlr_defaults(w: Any) -> dict[str, Any]:
    model = predictive.mlr_train(_bootstrap_rows(w), ["x1", "x2"], "y")
    return {"model": model.to_dict()}


def _dtc_defaults(w: Any) -> dict[str, Any]:
    rows = predictive.label_by_quartiles(_bootstrap_rows(w), "y")
    model = predictive.decision_tree_train(rows, ["x1", "x2"])
    return {"model": model.to_dict()}


def _annotate_defaults(w: Any) -> dict[str, Any]:
    sensors = _sensors(w)
    # every other sensor has metadata, so both code paths run
    table = {s: {"location": f"zone-{i % 7}", "sensorType": "env"} for i, s in enumerate(sensors) if i % 2 == 0}
    return {"table": table}


def _bloom_defaults(w: Any) -> dict[str, Any]:
    sensors = _sensors(w)
    return {"whitelist": sensors[::2]}


def _range_defaults(w: Any) -> dict[str, Any]:
    f = _primary(w)
    if w is None or not w.records:
        return {"bounds": {f: [10.0, 90.0]}}
    vals = np.array([m.fields.get(f) for m in w.records if isinstance(m.fields.get(f), (int, float))], dtype=float)
    vals = vals[~np.isnan(vals)]
    lo, hi = (float(np.quantile(vals, 0.05)), float(np.quantile(vals, 0.95))) if vals.size else (-math.inf, math.inf)
    return {"bounds": {f: [lo, hi]}}


def _plot_prep(w: Any) -> Callable[[Message], Message]:
    names = numeric_fields(w)[:2]

    def prep(m: Message) -> Message:
        pts = [[n, m.timestamp + k, float(m.fields.get(n, 0.0) or 0.0) + k] for n in names for k in range(10)]
        return Message(m.msg_id, m.sensor_id, m.timestamp, {"points": pts}, m.cause_id)

    return prep


def _zip_prep(w: Any) -> Callable[[Message], Message]:
    def prep(m: Message) -> Message:
        fields = dict(m.fields)
        fields["name"] = f"{m.sensor_id}-{m.msg_id}.json"
        return Message(m.msg_id, m.sensor_id, m.timestamp, fields, m.cause_id)

    return prep


def _window(width: int, keyed: bool = True) -> dict[str, Any]:
    return {"kind": "count", "width": width, "keyed": keyed}


C = CatalogEntry
T, F, A, FM = Pattern.TRANSFORM, Pattern.FILTER, Pattern.AGGREGATE, Pattern.FLATMAP

_ENTRIES = [
    C("ANN", "Annotate", "Parse", "Transform", "1:1", False, parse.AnnotateTask, T, defaults=_annotate_defaults),
    C("C2S", "CsvToSenML", "Parse", "Transform", "1:1", False, parse.CsvToSenmlTask, T),
    # one output per observation entry; the task table lists 1:1
    C("SML", "SenML Parsing", "Parse", "Transform", "1:N", False, parse.SenmlParseTask, FM,
      prepare=lambda w: parse.encode_senml),
    C("XML", "XML Parsing", "Parse", "Transform", "1:1", False, parse.XmlParseTask, T,
      prepare=lambda w: parse.encode_xml),
    C("BLF", "Bloom Filter", "Filter", "Filter", "1:0/1", False, filters.BloomFilterTask, F, defaults=_bloom_defaults),
    C("RGF", "Range Filter", "Filter", "Filter", "1:0/1", False, filters.RangeFilterTask, F, defaults=_range_defaults),
    C("ACC", "Accumulator", "Statistical", "Aggregate", "N:1", True, statistical.AccumulateTask, A,
      defaults=lambda w: {"window": _window(10)}),
    C("AVG", "Average", "Statistical", "Aggregate", "N:1", True, statistical.AverageTask, A,
      defaults=lambda w: {"field": _primary(w), "window": _window(10)}),
    C("DAC", "Distinct Approx. Count", "Statistical", "Transform", "1:1", True, statistical.DistinctCountTask, T,
      defaults=lambda w: {"field": _primary(w)}),
    C("KAL", "Kalman Filter", "Statistical", "Transform", "1:1", True, statistical.KalmanTask, T,
      defaults=lambda w: {"field": _primary(w)}),
    C("SOM", "Second Order Moment", "Statistical", "Transform", "1:1", True, statistical.SecondMomentTask, T,
      defaults=lambda w: {"field": _primary(w), "resolution": 1.0}),
    C("DTC", "Decision Tree Classify", "Predictive", "Transform", "1:1", False, predictive.DecisionTreeClassifyTask, T,
      prepare=_regression_prep, defaults=_dtc_defaults),
    C("DTT", "Decision Tree Train", "Predictive", "Aggregate", "N:1", False, predictive.DecisionTreeTrainTask, A,
      prepare=_regression_prep,
      defaults=lambda w: {"features": ["x1", "x2"], "target": "y", "window": _window(100, keyed=False)}),
    C("INP", "Interpolation", "Predictive", "Transform", "1:1", True, statistical.InterpolateTask, T,
      prepare=lambda w: _with_gaps(_primary(w)), defaults=lambda w: {"fields": [_primary(w)]}),
    C("MLR", "Multi-var. Linear Reg.", "Predictive", "Transform", "1:1", False, predictive.MlrPredictTask, T,
      prepare=_regression_prep, defaults=_mlr_defaults),
    C("MLT", "Multi-var. Linear Reg. Train", "Predictive", "Aggregate", "N:1", False, predictive.MlrTrainTask, A,
      prepare=_regression_prep,
      defaults=lambda w: {"predictors": ["x1", "x2"], "target": "y", "window": _window(100, keyed=False)}),
    C("SLR", "Sliding Linear Regression", "Predictive", "Flat Map", "N:M", True, predictive.SlidingRegressionTask, FM,
      defaults=lambda w: {"field": _primary(w)}),
    C("ABD", "Blob Download", "IO", "Source/Transform", "1:1", False, io.BlobDownloadTask, T, cpu_bound=False,
      defaults=lambda w: {"blob": "micro/payload.bin", "seed_bytes": 4096}),
    C("ABU", "Blob Upload", "IO", "Sink", "1:1", False, io.BlobUploadTask, T, cpu_bound=False),
    C("ATL", "Table Lookup", "IO", "Source/Transform", "1:1", False, io.TableLookupTask, T, cpu_bound=False,
      defaults=lambda w: {"preload": True}),
    C("ATR", "Table Range", "IO", "Source/Transform", "1:1", False, io.TableRangeTask, T, cpu_bound=False,
      defaults=lambda w: {"preload": True, "mode": "scan", "where_field": _primary(w), "lo": 40.0, "hi": 60.0}),
    C("ATI", "Table Insert", "IO", "Transform", "1:1", False, io.TableInsertTask, T, cpu_bound=False),
    C("MQP", "MQTT Publish", "IO", "Sink", "1:1", False, io.PublishTask, T, cpu_bound=False,
      defaults=lambda w: {"topic": "micro"}),
    C("MQS", "MQTT Subscribe", "IO", "Sink", "1:1", False, io.SubscribeTask, T, cpu_bound=False),
    C("LZP", "Local Files Zip", "IO", "Sink", "1:1", False, io.ZipTask, T, cpu_bound=False,
      prepare=_zip_prep, defaults=lambda w: {"destination": "local"}),
    C("RZP", "Remote Files Zip", "IO", "Sink", "1:1", False, io.ZipTask, T, cpu_bound=False,
      prepare=_zip_prep, defaults=lambda w: {"destination": "remote"}),
    C("PLT", "MultiLine Plot", "Visualization", "Transform", "1:1", False, visual.MultiLinePlotTask, T,
      prepare=_plot_prep),
]

CATALOG: dict[str, CatalogEntry] = {e.code: e for e in _ENTRIES}
TASK_CODES = tuple(CATALOG)


class ModelUpdateTask(Task):
    """Side channel of the prediction dataflow: installs a downloaded model.

    The model (JSON in ``bytes``) replaces the entry of its type in the run's
    shared registry; classification tasks read it between messages.
    """

    def process(self, msg: Message) -> Message:
        doc = json.loads(msg.fields["bytes"])
        spec = doc.get(predictive.MODEL_FIELD, doc)
        registry = self.ctx.shared.setdefault("models", {})
        registry[spec["type"]] = predictive.model_from_dict(spec)
        self.ctx.shared["model_updates"] = self.ctx.shared.get("model_updates", 0) + 1
        return msg.derive({"installed": spec["type"]})


class ClassLabelTask(Task):
    """Labels the ``rows`` of a batch message C1..C4 by quartiles of ``target``."""

    def __init__(self, target: str, class_field: str = predictive.CLASS_FIELD, **_: Any):
        self.target = target
        self.class_field = class_field

    def process(self, msg: Message) -> Message:
        rows = predictive.complete_rows(msg.fields.get(predictive.ROWS_FIELD) or [], [self.target])
        return msg.derive({**msg.fields, predictive.ROWS_FIELD: predictive.label_by_quartiles(rows, self.target, self.class_field)})


# tasks used by the applications but not benchmarked on their own
AUXILIARY: dict[str, Callable[..., Any]] = {
    "RES": predictive.ResidualTask,
    "MUP": ModelUpdateTask,
    "LBL": ClassLabelTask,
    "SUB": io.SubscribeSource,
    "TIMER": TimerSource,
}


def entry(code: str) -> CatalogEntry:
    try:
        return CATALOG[code.upper()]
    except KeyError:
        raise UnknownTask(f"unknown task {code!r}; known: {', '.join(TASK_CODES)}") from None


def create_task(kind: str, params: Mapping[str, Any] | None = None) -> Any:
    params = dict(params or {})
    code = kind.upper()
    if code in AUXILIARY:
        return AUXILIARY[code](**params)
    return entry(code).create(params)
