"""Application configuration: which fields each task of each app works on.

A config is an INI file. Each app has a section that maps task codes to
field lists; ``N/A`` marks a task the workload does not support, and
models are written ``inputs -> target``::

    [workload]
    name = CITY
    fixture = city.csv

    [pred]
    MLR = temperature, humidity, light -> airquality_raw
    DTC = temperature, humidity, light, dust -> airquality_raw

    [range]
    temperature = -20, 50
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..errors import ConfigIncomplete
from ..workload.model import ScalingSpec

PRESET_DIR = Path(__file__).with_name("presets")
NA = "N/A"
APPS = ("etl", "stats", "train", "pred")

# tasks each app needs a mapping for
REQUIRED: dict[str, tuple[str, ...]] = {
    "etl": ("RGF", "BLF", "INP", "ANN"),
    "stats": ("AVG", "DAC", "SLR"),
    "train": ("MLT", "DTT"),
    "pred": ("AVG", "MLR", "DTC"),
}

_DURATION = re.compile(r"^\s*([0-9.]+)\s*(ms|s|min|h|d)?\s*$")
_UNIT_MS = {"ms": 1, "s": 1000, "min": 60_000, "h": 3_600_000, "d": 86_400_000, None: 1}


def parse_duration_ms(text: str) -> float:
    """``"2h"`` -> 7200000.0; a bare number is milliseconds."""
    m = _DURATION.match(str(text))
    if not m:
        raise ConfigIncomplete(f"cannot read duration {text!r}")
    return float(m.group(1)) * _UNIT_MS[m.group(2)]


@dataclass(frozen=True)
class FieldMap:
    """Inputs of a task and, for models, the field they predict."""

    inputs: tuple[str, ...]
    target: str | None = None

    @classmethod
    def parse(cls, text: str) -> FieldMap | None:
        text = text.strip()
        if text.upper() == NA:
            return None
        lhs, _, rhs = text.partition("->")
        inputs = tuple(f.strip() for f in lhs.split(",") if f.strip())
        target = rhs.strip() or None
        if not inputs:
            raise ConfigIncomplete(f"empty field list {text!r}")
        return cls(inputs, target)

    def render(self) -> str:
        s = ", ".join(self.inputs)
        return f"{s} -> {self.target}" if self.target else s


@dataclass(frozen=True)
class AppConfig:
    workload: str
    # app -> task code -> mapping (None = N/A for this workload)
    mappings: Mapping[str, Mapping[str, FieldMap | None]]
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    scaling: ScalingSpec = ScalingSpec()
    parallelism: Mapping[str, int] = field(default_factory=dict)
    fixture: Path | None = None
    options: Mapping[str, str] = field(default_factory=dict)

    def mapping(self, app: str, task: str) -> FieldMap | None:
        """The mapping of ``task`` in ``app``; None if N/A. Raises ConfigIncomplete if absent."""
        section = self.mappings.get(app, {})
        if task not in section:
            raise ConfigIncomplete(f"{self.workload}: [{app}] has no entry for {task} (give fields or N/A)")
        return section[task]

    def require(self, app: str, task: str) -> FieldMap:
        m = self.mapping(app, task)
        if m is None:
            raise ConfigIncomplete(f"{self.workload}: {task} is N/A, so the {app.upper()} application cannot run")
        return m

    def check(self, app: str) -> None:
        for task in REQUIRED[app]:
            self.mapping(app, task)

    def option(self, name: str, default: Any = None) -> Any:
        return self.options.get(name, default)

    def with_scaling(self, temporal: float | None = None, spatial: int | None = None) -> AppConfig:
        s = ScalingSpec(
            self.scaling.temporal if temporal is None else temporal,
            self.scaling.spatial if spatial is None else spatial,
        )
        return AppConfig(self.workload, self.mappings, self.ranges, s, self.parallelism, self.fixture, self.options)

    def with_parallelism(self, plan: Mapping[str, int]) -> AppConfig:
        merged = {**self.parallelism, **plan}
        return AppConfig(self.workload, self.mappings, self.ranges, self.scaling, merged, self.fixture, self.options)


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    p.optionxform = str  # task codes and field names are case-sensitive
    return p


def loads_config(text: str, base_dir: str | Path | None = None) -> AppConfig:
    p = _parser()
    p.read_string(text)
    if not p.has_option("workload", "name"):
        raise ConfigIncomplete("config needs [workload] name")
    name = p.get("workload", "name").strip()
    fixture = None
    if p.has_option("workload", "fixture"):
        fx = Path(p.get("workload", "fixture").strip())
        if not fx.is_absolute():
            fx = (Path(base_dir) if base_dir else Path.cwd()) / fx
        fixture = fx
    mappings = {app: {k.upper(): FieldMap.parse(v) for k, v in p.items(app)} for app in APPS if p.has_section(app)}
    ranges = {}
    if p.has_section("range"):
        for f, v in p.items("range"):
            parts = [x.strip() for x in v.split(",")]
            if len(parts) != 2:
                raise ConfigIncomplete(f"range for {f!r} needs 'low, high'")
            # an empty side is unbounded
            lo = float(parts[0]) if parts[0] else -math.inf
            hi = float(parts[1]) if parts[1] else math.inf
            ranges[f] = (lo, hi)
    scaling = ScalingSpec(
        p.getfloat("scaling", "temporal", fallback=1.0),
        p.getint("scaling", "spatial", fallback=1),
    )
    parallelism = {k: int(v) for k, v in p.items("parallelism")} if p.has_section("parallelism") else {}
    options = dict(p.items("options")) if p.has_section("options") else {}
    return AppConfig(name, mappings, ranges, scaling, parallelism, fixture, options)


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    return loads_config(path.read_text(), base_dir=path.parent)


def preset(name: str) -> AppConfig:
    """One of the bundled presets: city, fit, grid or taxi."""
    path = PRESET_DIR / f"{name.lower()}.cfg"
    if not path.exists():
        known = sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))
        raise ConfigIncomplete(f"no preset {name!r}; known: {', '.join(known)}")
    return load_config(path)


def load_parallelism_plan(path: str | Path) -> dict[str, int]:
    """``vertex = instances`` lines, optionally under a [parallelism] header."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[parallelism]\n" + text
    p = _parser()
    p.read_string(text)
    if not p.has_section("parallelism"):
        raise ConfigIncomplete(f"{path}: no [parallelism] section")
    return {k: int(v) for k, v in p.items("parallelism")}
