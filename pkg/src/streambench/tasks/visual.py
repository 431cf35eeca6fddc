"""Visualization task: multi-series line charts rendered to SVG."""

from __future__ import annotations

from typing import Any, Iterable, Mapping, Sequence

from ..engine.message import OBS_TYPE, OBS_VALUE, TIMESTAMP, Message
from ..engine.task import Task
from ..errors import EmptyBatch
from ..plotting import line_chart

Point = tuple[str, float, float]


def multi_line_plot(points: Iterable[Point], title: str = "") -> bytes:
    """Render (seriesName, x, y) points as one line per series, in first-seen order."""
    series: dict[str, tuple[list[float], list[float]]] = {}
    for name, x, y in points:
        xs, ys = series.setdefault(str(name), ([], []))
        xs.append(float(x))
        ys.append(float(y))
    if not series:
        raise EmptyBatch("nothing to plot")
    return line_chart(series, title=title, xlabel="time", ylabel="value")


def points_from_rows(rows: Sequence[Mapping[str, Any]], y_fields: Sequence[str]) -> list[Point]:
    """Pick the first of ``y_fields`` present in each batched row; x is its timestamp."""
    pts: list[Point] = []
    for row in rows:
        for f in y_fields:
            if f in row and isinstance(row[f], (int, float)):
                series = f"{f}:{row[OBS_TYPE]}" if OBS_TYPE in row else f
                pts.append((series, row.get(TIMESTAMP, len(pts)), row[f]))
                break
    return pts


class MultiLinePlotTask(Task):
    """Plots a batch message (``points`` or accumulated ``batch`` rows); emits ``name`` + ``bytes``."""

    def __init__(self, y_fields: Sequence[str] = ("avg", "forecast", "distinct", OBS_VALUE), **_: Any):
        self.y_fields = list(y_fields)
        self.seq = 0

    def process(self, msg: Message) -> Message:
        points = msg.fields.get("points")
        if points is None:
            points = points_from_rows(msg.fields.get("batch") or [], self.y_fields)
        svg = multi_line_plot(points, title=msg.sensor_id)
        self.seq += 1
        name = f"plot-{msg.sensor_id}-{self.ctx.instance if hasattr(self, 'ctx') else 0}-{self.seq:06d}.svg"
        return msg.derive({"name": name, "bytes": svg})
