"""Running an application or micro-benchmark end to end."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..engine.runtime import Engine, EngineConfig
from ..engine.topology import TopologySpec
from ..errors import ConfigIncomplete, RuntimeFailure
from ..metrics.report import MetricsReport
from ..services.backends import ServiceBackends
from ..workload.ingest import ingest
from ..workload.model import StreamWorkload
from ..workload.scaling import apply_scaling
from .builders import MODEL_TOPIC, build_app, build_micro
from .config import AppConfig

# per-task counters worth reporting, when a task keeps them
COUNTERS = ("dropped", "withheld", "incomplete", "skipped", "filled", "cold")


@dataclass
class AppRun:
    app: str
    spec: TopologySpec
    report: MetricsReport
    services: ServiceBackends
    shared: dict[str, Any]
    counters: dict[str, dict[str, int]] = field(default_factory=dict)
    # the training run that fed a prediction run its models
    companion: AppRun | None = None


def app_workload(config: AppConfig, workload: StreamWorkload | None = None) -> StreamWorkload:
    """The config's fixture (unless ``workload`` is given), scaled per the config."""
    if workload is None:
        if config.fixture is None:
            raise ConfigIncomplete(f"{config.workload}: no workload given and no [workload] fixture")
        workload = ingest(config.fixture, name=config.workload)
    return apply_scaling(workload, config.scaling)


def task_counters(engine: Engine) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for name, insts in engine.instances.items():
        for inst in insts:
            for c in COUNTERS:
                v = getattr(inst.task, c, None)
                if isinstance(v, int) and not isinstance(v, bool):
                    out.setdefault(name, {}).setdefault(c, 0)
                    out[name][c] += v
    return out


def _engine_config(base: EngineConfig | None, **over: Any) -> EngineConfig:
    cfg = base or EngineConfig()
    return EngineConfig(**{**cfg.__dict__, **over})


def _run(app: str, config: AppConfig, workload: StreamWorkload, services: ServiceBackends,
         engine_config: EngineConfig | None, duration_limit_ms: float | None) -> tuple[AppRun, Engine]:
    spec = build_app(app, config, workload)
    shared: dict[str, Any] = {}
    engine = Engine(spec, workload, services=services, config=engine_config, shared=shared)
    report = engine.run(duration_limit_ms)
    report.run_meta["app"] = app
    return AppRun(app, spec, report, services, shared, task_counters(engine)), engine


def run_app(
    app: str,
    config: AppConfig,
    workload: StreamWorkload | None = None,
    *,
    services: ServiceBackends | None = None,
    engine_config: EngineConfig | None = None,
    duration_limit_ms: float | None = None,
    with_train: bool = True,
    scaled: bool = False,
) -> AppRun:
    """Run one application on ``workload`` (default: the config's fixture).

    ``scaled`` says ``workload`` already has the config's scaling applied.
    A prediction run gets its models from a training run executed
    alongside it on the same services, unless ``with_train`` is off.
    """
    app = app.lower()
    w = workload if scaled and workload is not None else app_workload(config, workload)
    services = services or ServiceBackends.temporary()
    if app != "pred" or not with_train:
        return _run(app, config, w, services, engine_config, duration_limit_ms)[0]

    result: dict[str, Any] = {}

    def pred() -> None:
        try:
            result["run"] = _run("pred", config, w, services, engine_config, duration_limit_ms)[0]
        except BaseException as exc:  # re-raised in the caller
            result["error"] = exc

    t = threading.Thread(target=pred, name="pred-run", daemon=True)
    t.start()
    # the trainer must not announce a model before the predictor listens
    deadline = time.monotonic() + 30.0
    while services.broker.subscriber_count(MODEL_TOPIC) == 0 and t.is_alive():
        if time.monotonic() > deadline:
            raise RuntimeFailure("prediction run never subscribed to model updates")
        time.sleep(0.005)
    train_cfg = _engine_config(engine_config, utilization_ms=None)
    train_run = _run("train", config, w, services, train_cfg, duration_limit_ms)[0]
    t.join()
    if "error" in result:
        raise result["error"]
    run = result["run"]
    run.companion = train_run
    return run


def run_micro(
    task: str,
    workload: StreamWorkload,
    *,
    params: Mapping[str, Any] | None = None,
    parallelism: int = 1,
    services: ServiceBackends | None = None,
    engine_config: EngineConfig | None = None,
    duration_limit_ms: float | None = None,
) -> AppRun:
    spec = build_micro(task, params, parallelism, workload)
    services = services or ServiceBackends.temporary()
    shared: dict[str, Any] = {}
    engine = Engine(spec, workload, services=services, config=engine_config, shared=shared)
    report = engine.run(duration_limit_ms)
    return AppRun(f"micro-{task.upper()}", spec, report, services, shared, task_counters(engine))


def write_run(run: AppRun, out_dir: str | Path) -> list[Path]:
    """Report files of ``run`` (and of its companion, in a subdirectory)."""
    from ..metrics.report import write_report

    out = Path(out_dir)
    paths = write_report(run.report, out)
    if run.companion is not None:
        paths += write_report(run.companion.report, out / run.companion.app)
    return paths
