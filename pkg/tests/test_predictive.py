from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streambench.engine import TaskContext, make_message, run_tasks_serially
from streambench.errors import EmptyBatch, SingularDesignMatrix
from streambench.tasks.predictive import (
    CLASS_LABELS,
    DecisionTreeClassifyTask,
    DecisionTreeModel,
    DecisionTreeTrainTask,
    MlrPredictTask,
    MlrTrainTask,
    RegressionModel,
    SlidingRegressionTask,
    decision_tree_train,
    label_by_quartiles,
    line_fit,
    mlr_predict,
    mlr_train,
    model_from_dict,
    slr_forecast,
)


def normal_equations(rows, predictors, target):
    """Closed-form beta = (X'X)^-1 X'y, solved directly."""
    X = np.array([[1.0] + [r[p] for p in predictors] for r in rows])
    y = np.array([r[target] for r in rows])
    return np.linalg.solve(X.T @ X, X.T @ y)


def closed_form_line(ys):
    n = len(ys)
    x = np.arange(n, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope = ((x - x.mean()) * (y - y.mean())).sum() / ((x - x.mean()) ** 2).sum()
    return y.mean() - slope * x.mean(), slope


# -- MLR ------------------------------------------------------------------------------


def test_exact_plane_recovered():
    rows = [{"a": float(a), "b": float(b), "y": 1 + 2 * a + 3 * b} for a, b in itertools.product(range(5), range(2))]
    model = mlr_train(rows, ["a", "b"], "y")
    assert model.beta == pytest.approx((1, 2, 3), abs=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_mlr_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    rows = [{"a": a, "b": b, "c": c, "y": 0.5 * a - b + 2 * c + e}
            for a, b, c, e in zip(*(rng.normal(0, 1, 200) for _ in range(3)), rng.normal(0, 0.3, 200))]
    got = np.array(mlr_train(rows, ["a", "b", "c"], "y").beta)
    assert np.max(np.abs(got - normal_equations(rows, ["a", "b", "c"], "y"))) <= 1e-8


def test_singular_design():
    rows = [{"a": float(i), "b": 2.0 * i, "y": float(i)} for i in range(10)]
    with pytest.raises(SingularDesignMatrix):
        mlr_train(rows, ["a", "b"], "y")
    with pytest.raises(SingularDesignMatrix):
        mlr_train(rows[:3], ["a", "b"], "y")
    with pytest.raises(EmptyBatch):
        mlr_train([], ["a"], "y")


def test_taxi_fare_prediction():
    model = RegressionModel((2.5, 0.01, 1.5), ("trip_time_in_secs", "trip_distance"), "fare_amount")
    msg = make_message("taxi", 0, {"trip_time_in_secs": 600.0, "trip_distance": 2.0, "fare_amount": 12.0})
    out = mlr_predict(model, msg)
    assert out.fields["predicted"] == pytest.approx(2.5 + 6 + 3)
    assert out.fields["observed"] == 12.0


def test_mlr_train_task_on_window_and_rows():
    msgs = [make_message("s", i, {"x": float(i), "y": 3.0 * i - 1}) for i in range(10)]
    (out,) = run_tasks_serially([MlrTrainTask(predictors=["x"], target="y", window=10)], msgs)
    assert out.fields["model"]["beta"] == pytest.approx([-1, 3])
    rows_msg = make_message("t", 0, {"rows": [m.fields for m in msgs]})
    (again,) = run_tasks_serially([MlrTrainTask(predictors=["x"], target="y")], [rows_msg])
    assert again.fields["model"] == out.fields["model"]


def test_mlr_train_skips_degenerate_fetched_batch():
    task = MlrTrainTask(predictors=["x"], target="y")
    assert run_tasks_serially([task], [make_message("t", 0, {"rows": []})]) == []
    assert task.skipped == 1


# -- SLR -------------------------------------------------------------------------------------


def test_linear_series_continues_line():
    ys = [1.0 + 2.0 * i for i in range(16)]
    assert slr_forecast(ys, 4) == pytest.approx([33, 35, 37, 39])


def test_constant_series():
    assert slr_forecast([7.0] * 16, 4) == [7.0] * 4


@given(st.lists(st.floats(-1e3, 1e3), min_size=16, max_size=16))
@settings(max_examples=100)
def test_slr_matches_closed_form(ys):
    a, b = closed_form_line(ys)
    ga, gb = line_fit(ys)
    assert ga == pytest.approx(a, abs=1e-9) and gb == pytest.approx(b, abs=1e-9)
    want = [a + b * (15 + h) for h in range(1, 5)]
    assert slr_forecast(ys, 4) == pytest.approx(want, abs=1e-9)


def test_slr_task_warm_up_and_slide():
    task = SlidingRegressionTask(window=16, horizon=4)
    msgs = [make_message("s", i, {"value": float(i)}) for i in range(20)]
    out = run_tasks_serially([task], msgs)
    # nothing for the first 15, then 4 forecasts per input
    assert len(out) == 5 * 4
    assert [m.fields["forecast"] for m in out[:4]] == pytest.approx([16, 17, 18, 19])
    assert [m.fields["horizon"] for m in out[:4]] == [1, 2, 3, 4]


# -- decision tree ------------------------------------------------------------------------------


def test_separable_batch_fully_learned():
    rows = [{"a": float(a), "b": float(b), "class": "C1" if a < 5 else ("C2" if b < 5 else "C3")}
            for a in range(10) for b in range(10)]
    model = decision_tree_train(rows, ["a", "b"])
    assert all(model.classify(r) == r["class"] for r in rows)


def test_single_class_single_leaf():
    rows = [{"a": float(i), "class": "C2"} for i in range(20)]
    model = decision_tree_train(rows, ["a"])
    assert model.root == {"leaf": "C2"} and model.depth() == 0


def test_empty_batch():
    with pytest.raises(EmptyBatch):
        decision_tree_train([], ["a"])


def test_unseen_category_falls_back_to_majority():
    root = {"feature": 0, "majority": "C3", "children": [[0, {"leaf": "C1"}]]}
    model = DecisionTreeModel(("a",), ((1.0, 2.0, 3.0),), root)
    assert model.classify({"a": 0.0}) == "C1"
    assert model.classify({"a": 9.0}) == "C3"


def test_quartile_labels():
    rows = label_by_quartiles([{"y": float(i)} for i in range(8)], "y")
    assert [r["class"] for r in rows] == ["C1", "C1", "C2", "C2", "C3", "C3", "C4", "C4"]


def test_city_features_train_and_classify():
    rng = np.random.default_rng(1)
    feats = ["temperature", "humidity", "light", "dust", "airquality_raw"]
    msgs = [make_message("c", i, {f: float(v) for f, v in zip(feats, rng.uniform(0, 100, 5))} | {"y": float(i % 100)})
            for i in range(100)]
    (trained,) = run_tasks_serially([DecisionTreeTrainTask(features=feats, target="y", window=100)], msgs)
    model = model_from_dict(trained.fields["model"])
    assert model.features == tuple(feats)
    out = run_tasks_serially([DecisionTreeClassifyTask(model=trained.fields["model"])], msgs)
    assert {m.fields["class"] for m in out} <= set(CLASS_LABELS)


def test_model_serialization_round_trip():
    rows = [{"a": float(i), "class": "C1" if i < 10 else "C4"} for i in range(20)]
    model = decision_tree_train(rows, ["a"])
    assert DecisionTreeModel.from_dict(model.to_dict()) == model
    reg = RegressionModel((1.0, 2.0), ("a",), "y")
    assert model_from_dict(reg.to_dict()) == reg


# -- model tasks --------------------------------------------------------------------------------


def test_no_model_withholds():
    task = MlrPredictTask()
    assert run_tasks_serially([task], [make_message("s", 0, {"x": 1.0})]) == []
    assert task.withheld == 1


def test_hot_swap_changes_classification():
    task = DecisionTreeClassifyTask()
    task.setup(TaskContext("dtc"))
    low = DecisionTreeModel(("a",), ((1.0, 2.0, 3.0),), {"leaf": "C1"})
    high = DecisionTreeModel(("a",), ((1.0, 2.0, 3.0),), {"leaf": "C4"})
    msg = make_message("s", 0, {"a": 1.0})
    task.ctx.shared["models"] = {"DTC": low}
    assert task.process(msg).fields["class"] == "C1"
    task.ctx.shared["models"]["DTC"] = high
    assert task.process(msg).fields["class"] == "C4"


def test_incomplete_input_counted():
    task = MlrPredictTask(model=RegressionModel((0.0, 1.0), ("x",), "y").to_dict())
    assert task.process(make_message("s", 0, {"z": 1.0})) is None
    assert task.incomplete == 1
