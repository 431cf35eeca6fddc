"""Per-run metrics aggregation and report files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import plotting
from ..errors import IoFailure
from .compute import (
    EMPTY_LATENCY,
    LatencyStats,
    compute_input_rate,
    compute_jitter,
    compute_throughput,
    latency_stats,
    message_latencies,
)
from .eventlog import EventLog
from .utilization import UtilizationSample

REPORT_CSVS = ("latency.csv", "throughput.csv", "jitter.csv", "utilization.csv", "input_rate.csv")


@dataclass
class MetricsReport:
    latency: LatencyStats = EMPTY_LATENCY
    throughput: list[float] = field(default_factory=list)
    input_rate: list[float] = field(default_factory=list)
    jitter: list[float] = field(default_factory=list)
    utilization: list[UtilizationSample] = field(default_factory=list)
    run_meta: dict[str, Any] = field(default_factory=dict)
    interval_ms: float = 1000.0
    sigma: float = math.nan
    long_term_input_rate: float = math.nan
    latencies: list[tuple[int, int, float]] = field(default_factory=list)
    event_log: EventLog = field(default_factory=EventLog)
    # (ts_ms, {vertex: queued messages})
    queue_samples: list[tuple[float, dict[str, int]]] = field(default_factory=list)
    # vertex -> {"in": n, "out": n}
    vertex_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    sink_messages: list[Any] = field(default_factory=list)
    partial: bool = False

    @property
    def source_count(self) -> int:
        return len(self.event_log.source_events)

    @property
    def sink_count(self) -> int:
        return len(self.event_log.sink_events)

    def summary(self) -> str:
        lat = self.latency
        lines = [
            f"topology: {self.run_meta.get('topology', '?')}",
            f"workload: {self.run_meta.get('workload', '?')}",
            f"duration_ms: {self.run_meta.get('duration_ms', float('nan')):.1f}",
            f"source_messages: {self.source_count}",
            f"sink_messages: {self.sink_count}",
            f"selectivity: {self.sigma:.6g}",
            f"latency_ms: min={lat.min:.3f} q1={lat.q1:.3f} median={lat.median:.3f} q3={lat.q3:.3f} max={lat.max:.3f}",
        ]
        if self.throughput:
            lines.append(f"throughput_mean_msg_per_sec: {sum(self.throughput) / len(self.throughput):.3f}")
        if self.jitter:
            jl = latency_stats(self.jitter)
            lines.append(f"jitter: q1={jl.q1:.4f} median={jl.median:.4f} q3={jl.q3:.4f}")
        if self.utilization:
            cpu = sum(s.cpu_pct for s in self.utilization) / len(self.utilization)
            mem = sum(s.mem_pct for s in self.utilization) / len(self.utilization)
            lines.append(f"utilization_mean: cpu={cpu:.2f}% mem={mem:.2f}%")
        if self.partial:
            lines.append("partial: true")
        for key in sorted(self.run_meta):
            if key not in ("topology", "workload", "duration_ms"):
                lines.append(f"meta.{key}: {self.run_meta[key]}")
        return "\n".join(lines) + "\n"


def build_report(
    log: EventLog,
    interval_ms: float = 1000.0,
    sigma: float | None = None,
    utilization: list[UtilizationSample] | None = None,
    end_ms: float | None = None,
    **extra: Any,
) -> MetricsReport:
    """Aggregate a finished run's event log.

    ``sigma`` defaults to the realized gain (sink events / source events) and
    the long-term input rate to the full-run mean of the input series.
    """
    lat = message_latencies(log)
    end = log.end_ms if end_ms is None else end_ms
    if log.source_events or log.sink_events:
        end = max(end, 1e-9)
        out_series = compute_throughput(log, interval_ms, 0.0, end)
        in_series = compute_input_rate(log, interval_ms, 0.0, end)
    else:
        out_series, in_series = [], []
    n_in, n_out = len(log.source_events), len(log.sink_events)
    if sigma is None:
        sigma = n_out / n_in if n_in else math.nan
    mean_in = sum(in_series) / len(in_series) if in_series else math.nan
    jitter: list[float] = []
    if in_series and sigma and mean_in and not math.isnan(sigma):
        jitter = compute_jitter(out_series, in_series, sigma, mean_in)
    return MetricsReport(
        latency=latency_stats(l for _, _, l in lat),
        throughput=out_series,
        input_rate=in_series,
        jitter=jitter,
        utilization=list(utilization or []),
        interval_ms=interval_ms,
        sigma=sigma,
        long_term_input_rate=mean_in,
        latencies=lat,
        event_log=log,
        **extra,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Write CSVs, summary and SVG charts; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        step = report.interval_ms
        written = []

        p = out / "latency.csv"
        rows = sorted(report.latencies)
        _write_csv(p, ["msgId", "causeId", "latencyMs"], ((m, c, _fmt(l)) for m, c, l in rows))
        written.append(p)

        p = out / "throughput.csv"
        _write_csv(p, ["intervalStartMs", "msgPerSec"], ((_fmt(i * step), _fmt(v)) for i, v in enumerate(report.throughput)))
        written.append(p)

        p = out / "input_rate.csv"
        _write_csv(p, ["intervalStartMs", "msgPerSec"], ((_fmt(i * step), _fmt(v)) for i, v in enumerate(report.input_rate)))
        written.append(p)

        p = out / "jitter.csv"
        _write_csv(p, ["intervalStartMs", "J"], ((_fmt(i * step), _fmt(v)) for i, v in enumerate(report.jitter)))
        written.append(p)

        p = out / "utilization.csv"
        _write_csv(p, ["tsMs", "cpuPct", "memPct"], ((_fmt(s.ts_ms), _fmt(s.cpu_pct), _fmt(s.mem_pct)) for s in report.utilization))
        written.append(p)

        p = out / "summary.txt"
        p.write_text(report.summary())
        written.append(p)

        p = out / "latency.svg"
        boxes = {} if report.latency.count == 0 else {"end-to-end": report.latency.as_dict()}
        p.write_bytes(plotting.box_chart(boxes, title="End-to-end latency", ylabel="ms"))
        written.append(p)

        p = out / "throughput.svg"
        xs = [i * step / 1000.0 for i in range(len(report.throughput))]
        p.write_bytes(
            plotting.line_chart(
                {"output": (xs, report.throughput), "input": (xs, report.input_rate)},
                title="Throughput",
                xlabel="s",
                ylabel="msg/sec",
            )
        )
        written.append(p)

        p = out / "jitter.svg"
        xs = [i * step / 1000.0 for i in range(len(report.jitter))]
        p.write_bytes(plotting.line_chart({"jitter": (xs, report.jitter)}, title="Jitter", xlabel="s", ylabel="J"))
        written.append(p)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out}: {exc}") from exc
    return written
