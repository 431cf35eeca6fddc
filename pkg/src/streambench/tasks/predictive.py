"""Predictive tasks: linear regression (batch and sliding) and a decision tree."""

from __future__ import annotations

import bisect
import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

from ..engine.message import OBS_TYPE, OBS_VALUE, Message
from ..engine.task import AggregateTask, Outputs, Task
from ..engine.windows import WindowSpec
from ..errors import EmptyBatch, MissingField, NonNumericField, SingularDesignMatrix
from .statistical import batch_row, field_names, resolve_field

CLASS_LABELS = ("C1", "C2", "C3", "C4")
MODEL_FIELD = "model"
MODEL_TYPE = "modelType"
ROWS_FIELD = "rows"
CLASS_FIELD = "class"

_ABSENT = object()


def _num(row: Mapping[str, Any], name: str) -> float:
    v = row.get(name, _ABSENT)
    if v is _ABSENT:
        raise MissingField(f"row lacks field {name!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NonNumericField(f"field {name!r} is not numeric: {v!r}")
    if math.isnan(v):
        raise MissingField(f"field {name!r} is missing (NaN)")
    return float(v)


def complete_rows(rows: Sequence[Mapping[str, Any]], names: Sequence[str]) -> list[Mapping[str, Any]]:
    """Rows holding a finite number for every one of ``names``."""
    out = []
    for r in rows:
        vals = [r.get(n) for n in names]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) and not math.isnan(v) for v in vals):
            out.append(r)
    return out


def rows_of(msgs: Sequence[Message]) -> list[dict[str, Any]]:
    return [batch_row(m) for m in msgs]


# -- multi-variate linear regression ------------------------------------------------


@dataclass(frozen=True)
class RegressionModel:
    beta: tuple[float, ...]
    predictors: tuple[str, ...]
    target: str

    def __post_init__(self) -> None:
        if len(self.beta) != len(self.predictors) + 1:
            raise ValueError("beta needs an intercept plus one weight per predictor")

    def predict(self, row: Mapping[str, Any]) -> float:
        return self.beta[0] + math.fsum(b * _num(row, p) for b, p in zip(self.beta[1:], self.predictors))

    def to_dict(self) -> dict[str, Any]:
        return {"type": "MLR", "beta": list(self.beta), "predictors": list(self.predictors), "target": self.target}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> RegressionModel:
        return cls(tuple(float(b) for b in d["beta"]), tuple(d["predictors"]), str(d["target"]))


def mlr_train(rows: Sequence[Mapping[str, Any]], predictors: Sequence[str], target: str) -> RegressionModel:
    """Ordinary least squares fit of ``target`` on ``predictors`` plus an intercept."""
    p = len(predictors)
    if not rows:
        raise EmptyBatch("cannot train on an empty batch")
    if len(rows) <= p + 1:
        raise SingularDesignMatrix(f"{len(rows)} rows cannot determine {p + 1} coefficients with residual")
    X = np.array([[1.0] + [_num(r, f) for f in predictors] for r in rows])
    y = np.array([_num(r, target) for r in rows])
    if np.linalg.matrix_rank(X) < p + 1:
        raise SingularDesignMatrix("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return RegressionModel(tuple(float(b) for b in beta), tuple(predictors), target)


def mlr_predict(model: RegressionModel, msg: Message) -> Message:
    row = batch_row(msg)
    return msg.with_fields(predicted=model.predict(row), observed=row.get(model.target))


# -- sliding linear regression ------------------------------------------------------


def line_fit(ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares intercept and slope of ``ys`` against 0..n-1."""
    n = len(ys)
    if n == 1:
        return float(ys[0]), 0.0
    xbar = (n - 1) / 2.0
    ybar = math.fsum(ys) / n
    sxx = n * (n * n - 1) / 12.0
    sxy = math.fsum((i - xbar) * (y - ybar) for i, y in enumerate(ys))
    slope = sxy / sxx
    return ybar - slope * xbar, slope


def slr_forecast(ys: Sequence[float], horizon: int) -> list[float]:
    a, b = line_fit(ys)
    n = len(ys)
    return [a + b * (n - 1 + h) for h in range(1, horizon + 1)]


class SlidingRegressionTask(Task):
    """Per key: once ``window`` values are buffered, emit ``horizon`` forecasts per input."""

    def __init__(
        self,
        field: str | None = None,
        window: int = 16,
        horizon: int = 4,
        fields: Sequence[str] | None = None,
        **_: Any,
    ):
        if window < 2 or horizon < 1:
            raise ValueError("window must be >= 2 and horizon >= 1")
        self.fields = field_names(field, fields)
        self.width = int(window)
        self.horizon = int(horizon)
        self.buffers: dict[Hashable, deque[float]] = {}

    def process(self, msg: Message) -> Outputs:
        name = resolve_field(msg, self.fields)
        if name is None:
            return None
        v = msg.get(name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise NonNumericField(f"field {name!r} is not numeric: {v!r}")
        if math.isnan(v):
            return None
        key = (msg.sensor_id, name)
        buf = self.buffers.get(key)
        if buf is None:
            buf = self.buffers[key] = deque(maxlen=self.width)
        buf.append(float(v))
        if len(buf) < self.width:
            return None
        return [
            msg.derive({OBS_TYPE: name, "forecast": y, "horizon": h})
            for h, y in enumerate(slr_forecast(buf, self.horizon), start=1)
        ]


# -- decision tree ------------------------------------------------------------------


def quartile_edges(values: Sequence[float]) -> list[float]:
    return [float(q) for q in np.quantile(np.asarray(values, dtype=float), [0.25, 0.5, 0.75])]


def bin_index(edges: Sequence[float], v: float) -> int:
    return bisect.bisect_right(edges, v)


def label_by_quartiles(rows: Sequence[Mapping[str, Any]], target: str, class_field: str = CLASS_FIELD) -> list[dict[str, Any]]:
    """Tag each row with C1..C4, the quartile bin of its ``target`` value."""
    if not rows:
        return []
    edges = quartile_edges([_num(r, target) for r in rows])
    return [{**r, class_field: CLASS_LABELS[bin_index(edges, _num(r, target))]} for r in rows]


def _majority(labels: Sequence[str]) -> str:
    counts = Counter(labels)
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def _entropy(labels: Sequence[str]) -> float:
    n = len(labels)
    return -sum((c / n) * math.log2(c / n) for c in Counter(labels).values())


def _build(rows: list[tuple[int, ...]], labels: list[str], features: list[int], min_rows: int) -> dict[str, Any]:
    majority = _majority(labels)
    if len(set(labels)) == 1 or not features or len(rows) < min_rows:
        return {"leaf": majority}
    base = _entropy(labels)
    best, best_gain = None, 0.0
    for f in features:
        parts: dict[int, list[str]] = {}
        for r, lab in zip(rows, labels):
            parts.setdefault(r[f], []).append(lab)
        rem = sum(len(p) / len(rows) * _entropy(p) for p in parts.values())
        gain = base - rem
        if gain > best_gain + 1e-12:
            best, best_gain = f, gain
    if best is None:
        return {"leaf": majority}
    groups: dict[int, tuple[list, list]] = {}
    for r, lab in zip(rows, labels):
        g = groups.setdefault(r[best], ([], []))
        g[0].append(r)
        g[1].append(lab)
    rest = [f for f in features if f != best]
    children = [[b, _build(gr, gl, rest, min_rows)] for b, (gr, gl) in sorted(groups.items())]
    return {"feature": best, "majority": majority, "children": children}


@dataclass(frozen=True)
class DecisionTreeModel:
    """ID3 tree over quartile-binned numeric features."""

    features: tuple[str, ...]
    edges: tuple[tuple[float, ...], ...]
    root: Mapping[str, Any]
    classes: tuple[str, ...] = CLASS_LABELS

    def classify(self, row: Mapping[str, Any]) -> str:
        binned = [bin_index(e, _num(row, f)) for f, e in zip(self.features, self.edges)]
        node = self.root
        while "leaf" not in node:
            v = binned[node["feature"]]
            nxt = next((child for b, child in node["children"] if b == v), None)
            if nxt is None:
                # unseen category at this node
                return node["majority"]
            node = nxt
        return node["leaf"]

    def depth(self) -> int:
        def d(node: Mapping[str, Any]) -> int:
            return 0 if "leaf" in node else 1 + max(d(c) for _, c in node["children"])

        return d(self.root)

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "DTC",
            "features": list(self.features),
            "edges": [list(e) for e in self.edges],
            "root": self.root,
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> DecisionTreeModel:
        return cls(
            tuple(d["features"]),
            tuple(tuple(float(x) for x in e) for e in d["edges"]),
            d["root"],
            tuple(d.get("classes", CLASS_LABELS)),
        )


def decision_tree_train(
    rows: Sequence[Mapping[str, Any]],
    features: Sequence[str],
    class_field: str = CLASS_FIELD,
    min_rows: int = 2,
) -> DecisionTreeModel:
    if not rows:
        raise EmptyBatch("cannot train a decision tree on an empty batch")
    edges = [quartile_edges([_num(r, f) for r in rows]) for f in features]
    binned = [tuple(bin_index(e, _num(r, f)) for f, e in zip(features, edges)) for r in rows]
    labels = []
    for r in rows:
        lab = r.get(class_field, _ABSENT)
        if lab is _ABSENT:
            raise MissingField(f"row lacks class field {class_field!r}")
        labels.append(str(lab))
    root = _build(binned, labels, list(range(len(features))), min_rows)
    return DecisionTreeModel(tuple(features), tuple(tuple(e) for e in edges), root)


def decision_tree_classify(model: DecisionTreeModel, msg: Message) -> Message:
    return msg.with_fields(**{CLASS_FIELD: model.classify(batch_row(msg))})


def model_from_dict(d: Mapping[str, Any]) -> RegressionModel | DecisionTreeModel:
    kind = d.get("type")
    if kind == "MLR":
        return RegressionModel.from_dict(d)
    if kind == "DTC":
        return DecisionTreeModel.from_dict(d)
    raise ValueError(f"unknown model type {kind!r}")


# -- tasks ----------------------------------------------------------------------------


class _TrainTask(AggregateTask):
    """Trains on a count window of messages, or at once on a message that carries ``rows``."""

    model_type = ""

    def __init__(self, window: Any = 100, **_: Any):
        super().__init__(WindowSpec.from_params(window))

    def key(self, msg: Message) -> Hashable:
        return msg.sensor_id if self.window.keyed else None

    skipped = 0

    def process(self, msg: Message) -> Outputs:
        rows = msg.fields.get(ROWS_FIELD)
        if rows is not None:
            # a fetched batch too small or degenerate to fit is skipped, not fatal
            try:
                return self._emit(msg, self.train(rows))
            except (EmptyBatch, SingularDesignMatrix):
                self.skipped += 1
                return None
        return super().process(msg)

    def aggregate(self, batch: list[Message]) -> Message:
        return self._emit(batch[-1], self.train(rows_of(batch)))

    def _emit(self, msg: Message, model: Any) -> Message:
        return msg.derive({MODEL_FIELD: model.to_dict(), MODEL_TYPE: self.model_type})

    def train(self, rows: Sequence[Mapping[str, Any]]) -> Any:
        raise NotImplementedError


class MlrTrainTask(_TrainTask):
    model_type = "MLR"

    def __init__(self, predictors: Sequence[str] = ("x",), target: str = "y", window: Any = 100, **kw: Any):
        super().__init__(window)
        self.predictors = list(predictors)
        self.target = target

    def train(self, rows: Sequence[Mapping[str, Any]]) -> RegressionModel:
        return mlr_train(complete_rows(rows, [*self.predictors, self.target]), self.predictors, self.target)


class DecisionTreeTrainTask(_TrainTask):
    """Rows lacking ``class_field`` are labelled by quartiles of ``target`` first."""

    model_type = "DTC"

    def __init__(
        self,
        features: Sequence[str] = ("x",),
        class_field: str = CLASS_FIELD,
        target: str | None = None,
        window: Any = 100,
        **kw: Any,
    ):
        super().__init__(window)
        self.features = list(features)
        self.class_field = class_field
        self.target = target

    def train(self, rows: Sequence[Mapping[str, Any]]) -> DecisionTreeModel:
        if rows and self.class_field not in rows[0] and self.target:
            rows = label_by_quartiles(complete_rows(rows, [self.target]), self.target, self.class_field)
        rows = complete_rows(rows, self.features)
        return decision_tree_train(rows, self.features, self.class_field)


class _ModelTask(Task):
    """Applies the current model of its type.

    The model comes from ``model`` (a dict) or, when the run shares a model
    registry (``ctx.shared['models']``), from the newest entry there. With
    no model yet, predictions are withheld and counted.
    """

    model_type = ""

    def __init__(self, model: Mapping[str, Any] | None = None, **_: Any):
        self.model = model_from_dict(model) if model else None
        self.withheld = 0
        self.incomplete = 0

    def current(self) -> Any:
        registry = getattr(self, "ctx", None) and self.ctx.shared.get("models")
        if registry:
            m = registry.get(self.model_type)
            if m is not None:
                return m
        return self.model

    def process(self, msg: Message) -> Outputs:
        model = self.current()
        if model is None:
            self.withheld += 1
            return None
        try:
            return self.apply(model, msg)
        except (MissingField, NonNumericField):
            self.incomplete += 1
            return None

    def apply(self, model: Any, msg: Message) -> Message:
        raise NotImplementedError


class MlrPredictTask(_ModelTask):
    model_type = "MLR"

    def apply(self, model: RegressionModel, msg: Message) -> Message:
        return mlr_predict(model, msg)


class DecisionTreeClassifyTask(_ModelTask):
    model_type = "DTC"

    def apply(self, model: DecisionTreeModel, msg: Message) -> Message:
        return decision_tree_classify(model, msg)


class ResidualTask(Task):
    """Compares each prediction with a moving average of the observed target.

    Emits ``movingAvg`` over the last ``window`` observations of the key and
    ``residual`` = predicted - movingAvg.
    """

    def __init__(self, target: str = OBS_VALUE, window: int = 10, **_: Any):
        self.target = target
        self.width = int(window)
        self.history: dict[Hashable, deque[float]] = {}

    def process(self, msg: Message) -> Message:
        hist = self.history.get(msg.sensor_id)
        if hist is None:
            hist = self.history[msg.sensor_id] = deque(maxlen=self.width)
        obs = msg.get(self.target)
        if isinstance(obs, (int, float)) and not isinstance(obs, bool) and not math.isnan(obs):
            hist.append(float(obs))
        avg = math.fsum(hist) / len(hist) if hist else float("nan")
        pred = msg.get("predicted", float("nan"))
        return msg.with_fields(movingAvg=avg, residual=pred - avg)
