"""Deterministic SVG charts (no display server needed)."""

from __future__ import annotations

import io
import threading
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "streambench"
matplotlib.rcParams["svg.fonttype"] = "none"

from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

# matplotlib's shared caches are not guaranteed thread-safe
_render_lock = threading.Lock()


def _to_svg(fig: Figure) -> bytes:
    FigureCanvasSVG(fig)
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def line_chart(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> bytes:
    """One line per entry of ``series`` (name -> (xs, ys)); each line gets gid ``series-<name>``."""
    with _render_lock:
        # fixed margins and legend position: automatic layout triples the render time,
        # and the plotting task renders one chart per accumulated batch
        fig = Figure(figsize=(6, 3.5))
        fig.subplots_adjust(left=0.12, right=0.97, bottom=0.14, top=0.9)
        ax = fig.add_subplot()
        for name, (xs, ys) in series.items():
            (line,) = ax.plot(list(xs), list(ys), label=str(name), linewidth=1.2)
            line.set_gid(f"series-{name}")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend(loc="upper left", fontsize="small")
        return _to_svg(fig)


def box_chart(
    boxes: Mapping[str, Mapping[str, float]],
    title: str = "",
    ylabel: str = "",
) -> bytes:
    """Box plot from precomputed stats (keys: q1, median, q3, whisker_low, whisker_high)."""
    with _render_lock:
        fig = Figure(figsize=(4, 3.5))
        ax = fig.add_subplot()
        stats = [
            {
                "label": name,
                "q1": s["q1"],
                "med": s["median"],
                "q3": s["q3"],
                "whislo": s["whisker_low"],
                "whishi": s["whisker_high"],
                "fliers": [],
            }
            for name, s in boxes.items()
        ]
        if stats:
            ax.bxp(stats, showfliers=False)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return _to_svg(fig)
