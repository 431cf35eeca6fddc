"""``riot``: run micro-benchmarks, applications and peak-rate searches.

Examples::

    riot micro KAL --synthetic uniform:1000:10s
    riot app etl --workload city.csv --temporal 30 --spatial 30
    riot peak XML

Exit status: 0 on success, 2 for configuration errors, 3 for failures
during the run.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

from .apps.config import AppConfig, load_config, load_parallelism_plan, parse_duration_ms, preset
from .apps.run import AppRun, app_workload, run_app, run_micro, write_run
from .engine.runtime import EngineConfig
from .errors import ConfigError, ConfigIncomplete
from .workload.ingest import ingest
from .workload.model import ScalingSpec, StreamWorkload
from .workload.scaling import apply_scaling
from .workload.synth import DISTRIBUTIONS, synthesize

log = logging.getLogger("riot")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_SYNTHETIC = "uniform:100:10s"


def parse_synthetic(text: str) -> tuple[str, float, float]:
    """``DIST:RATE:DUR`` -> (distribution, peak msg/s, duration ms)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigIncomplete(f"--synthetic wants DIST:RATE:DUR, got {text!r}")
    dist, rate, dur = parts
    if dist not in DISTRIBUTIONS:
        raise ConfigIncomplete(f"unknown distribution {dist!r}; expected one of {', '.join(DISTRIBUTIONS)}")
    try:
        peak = float(rate)
    except ValueError:
        raise ConfigIncomplete(f"rate {rate!r} is not a number") from None
    return dist, peak, parse_duration_ms(dur)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workload", help="CSV or SenML file to replay")
    common.add_argument("--synthetic", metavar="DIST:RATE:DUR", help="generated workload, e.g. uniform:1000:10s")
    common.add_argument("--temporal", type=float, help="temporal scaling factor (>= 1)")
    common.add_argument("--spatial", type=int, help="spatial scaling factor (integer >= 1)")
    common.add_argument("--duration", help="stop the sources after this long, e.g. 60s")
    common.add_argument("--out-dir", help="report directory (default: riot-out/<mode>-<target>)")
    common.add_argument("--seed", type=int, default=0, help="seed for every pseudo-random choice")
    common.add_argument("--metrics-interval-ms", type=float, default=1000.0, help="throughput/jitter bin width")
    common.add_argument("--parallelism-plan", help="file of 'vertex = instances' lines")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="riot", description="Streaming IoT benchmark runner.")
    sub = p.add_subparsers(dest="mode", required=True)
    m = sub.add_parser("micro", parents=[common], help="source -> task -> sink")
    m.add_argument("task", help="task code, e.g. KAL")
    a = sub.add_parser("app", parents=[common], help="an application dataflow")
    a.add_argument("app", choices=["etl", "stats", "train", "pred"])
    a.add_argument("--config", help="preset name (city, fit, grid, taxi) or config file; default from the workload name")
    a.add_argument("--no-train", action="store_true", help="run PRED without a training run alongside")
    k = sub.add_parser("peak", parents=[common], help="peak sustained rate of one task")
    k.add_argument("task", help="task code, e.g. XML")
    k.add_argument("--budget", type=int, default=1, help="task instances")
    k.add_argument("--probe-seconds", type=float, default=2.0, help="length of each probe")
    return p


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(interval_ms=args.metrics_interval_ms, seed=args.seed)


def _duration(args: argparse.Namespace) -> float | None:
    return parse_duration_ms(args.duration) if args.duration else None


def _scaling(args: argparse.Namespace, base: ScalingSpec | None = None) -> ScalingSpec:
    base = base or ScalingSpec()
    try:
        return ScalingSpec(
            base.temporal if args.temporal is None else args.temporal,
            base.spatial if args.spatial is None else args.spatial,
        )
    except ValueError as exc:
        raise ConfigIncomplete(str(exc)) from None


def _workload(args: argparse.Namespace, fields: dict[str, tuple[float, float]] | None = None, default_synthetic: str | None = None) -> StreamWorkload | None:
    if args.workload and args.synthetic:
        raise ConfigIncomplete("give --workload or --synthetic, not both")
    if args.workload:
        path = Path(args.workload)
        if not path.exists():
            raise ConfigIncomplete(f"workload file {path} does not exist")
        return ingest(path)
    spec = args.synthetic or default_synthetic
    if spec is None:
        return None
    dist, rate, dur = parse_synthetic(spec)
    return synthesize(dist, rate, int(dur), seed=args.seed, fields=fields, name=f"synthetic-{dist}")


def _resolve_config(args: argparse.Namespace) -> AppConfig:
    name = args.config
    if name is None:
        if not args.workload:
            raise ConfigIncomplete("app runs need --config or a --workload named after a preset (city.csv, ...)")
        name = Path(args.workload).stem
    path = Path(name)
    return load_config(path) if path.suffix == ".cfg" and path.exists() else preset(name)


def _out_dir(args: argparse.Namespace, target: str) -> Path:
    return Path(args.out_dir) if args.out_dir else Path("riot-out") / f"{args.mode}-{target.lower()}"


def _finish(run: AppRun, out: Path) -> None:
    paths = write_run(run, out)
    print(run.report.summary())
    for name, c in sorted(run.counters.items()):
        print(f"counter.{name}: " + ", ".join(f"{k}={v}" for k, v in sorted(c.items())))
    print(f"report: {out} ({len(paths)} files)")


def cmd_micro(args: argparse.Namespace) -> int:
    w = _workload(args, default_synthetic=DEFAULT_SYNTHETIC)
    w = apply_scaling(w, _scaling(args))
    plan = load_parallelism_plan(args.parallelism_plan) if args.parallelism_plan else {}
    par = plan.get(args.task.upper(), plan.get(args.task, 1))
    run = run_micro(args.task, w, parallelism=par, engine_config=_engine_config(args), duration_limit_ms=_duration(args))
    _finish(run, _out_dir(args, args.task))
    return EXIT_OK


def cmd_app(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    if args.parallelism_plan:
        config = config.with_parallelism(load_parallelism_plan(args.parallelism_plan))
    if args.workload or args.synthetic:
        fields = {f: (lo, hi) for f, (lo, hi) in config.ranges.items()} or None
        # an explicit workload is not scaled unless asked to be
        config = config.with_scaling(args.temporal or 1.0, args.spatial or 1)
        w = app_workload(config, _workload(args, fields))
    else:
        config = config.with_scaling(args.temporal, args.spatial)
        w = app_workload(config)
    log.info("running %s on %s (%d records, scaling %sx)", args.app, w.name, len(w.records), config.scaling.effective)
    run = run_app(args.app, config, w, engine_config=_engine_config(args), duration_limit_ms=_duration(args),
                  with_train=not args.no_train, scaled=True)
    _finish(run, _out_dir(args, args.app))
    return EXIT_OK


def cmd_peak(args: argparse.Namespace) -> int:
    from .metrics.peak import find_peak_rate

    w = _workload(args)
    res = find_peak_rate(args.task, args.budget, workload=w, seed=args.seed, duration_s=args.probe_seconds)
    out = _out_dir(args, args.task)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "probes.csv").open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["rate", "stable", "achieved_rate", "queue_slope", "latency_rise_ms", "median_latency_ms", "reasons"])
        for p in res.probes:
            wr.writerow([p.rate, int(p.stable), p.achieved_rate, p.queue_slope, p.latency_rise_ms, p.median_latency_ms, "; ".join(p.reasons)])
    print(f"peak {res.task} x{res.budget}: {res.peak:.1f} msg/sec ({res.probe_count} probes)")
    print(f"report: {out / 'probes.csv'}")
    return EXIT_OK


COMMANDS = {"micro": cmd_micro, "app": cmd_app, "peak": cmd_peak}


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.mode](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"riot: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime failure
        log.debug("run failed", exc_info=True)
        print(f"riot: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
