"""Application topologies, their configurations, and the resource planner."""

from .builders import (
    annotation_table,
    bloom_whitelist,
    build_app,
    build_etl,
    build_micro,
    build_pred,
    build_stats,
    build_train,
    train_schedule,
)
from .config import AppConfig, FieldMap, load_config, load_parallelism_plan, loads_config, preset
from .planner import Allocation, allocate, plan_resources, propagate_rates
from .run import AppRun, app_workload, run_app, run_micro, write_run

__all__ = [
    "Allocation",
    "AppConfig",
    "AppRun",
    "FieldMap",
    "allocate",
    "annotation_table",
    "app_workload",
    "bloom_whitelist",
    "build_app",
    "build_etl",
    "build_micro",
    "build_pred",
    "build_stats",
    "build_train",
    "load_config",
    "load_parallelism_plan",
    "loads_config",
    "plan_resources",
    "preset",
    "propagate_rates",
    "run_app",
    "run_micro",
    "train_schedule",
    "write_run",
]
