"""Stream workloads: ingest, temporal/spatial scaling, replay and synthesis."""

from .ingest import SchemaMap, ingest, write_csv
from .model import ScalingSpec, StreamWorkload
from .replay import RateSource, ReplaySource, ReplayStats, TimerSource, replay
from .scaling import DAY_MS, apply_scaling, rate_shape_ks, scale_spatial, scale_temporal
from .synth import DISTRIBUTIONS, synthesize

__all__ = [
    "DAY_MS",
    "DISTRIBUTIONS",
    "RateSource",
    "ReplaySource",
    "ReplayStats",
    "ScalingSpec",
    "SchemaMap",
    "StreamWorkload",
    "TimerSource",
    "apply_scaling",
    "ingest",
    "rate_shape_ks",
    "replay",
    "scale_spatial",
    "scale_temporal",
    "synthesize",
    "write_csv",
]
