"""Latency, throughput, jitter and utilization metrics.

The peak-rate search lives in :mod:`streambench.metrics.peak`; it drives the
engine and is imported on demand.
"""

from .compute import (
    LatencyStats,
    compute_input_rate,
    compute_jitter,
    compute_latency,
    compute_throughput,
    latency_stats,
    message_latencies,
    rate_series,
)
from .eventlog import EventLog
from .report import MetricsReport, build_report, write_report
from .utilization import UtilizationSample, UtilizationSampler, sample_utilization

__all__ = [
    "EventLog",
    "LatencyStats",
    "MetricsReport",
    "UtilizationSample",
    "UtilizationSampler",
    "build_report",
    "compute_input_rate",
    "compute_jitter",
    "compute_latency",
    "compute_throughput",
    "latency_stats",
    "message_latencies",
    "rate_series",
    "sample_utilization",
    "write_report",
]
