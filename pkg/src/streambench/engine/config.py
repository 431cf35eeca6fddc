"""Load and dump topologies as INI-style text.

Example::

    [topology]
    name = micro-KAL

    [task:src]
    pattern = source

    [task:kal]
    kind = KAL
    stateful = true
    parallelism = 4
    params = {"field": "value"}

    [task:sink]
    pattern = sink

    [edges]
    src -> kal = hash(sensorId)
    kal -> sink = shuffle

``params`` is a JSON object.
"""

from __future__ import annotations

import configparser
import io
import json
from pathlib import Path

from ..errors import ConfigError
from .routing import RoutingMode
from .topology import Edge, Pattern, TaskDescriptor, TopologySpec, define_topology
from .windows import WindowSpec

_TRUE = {"1", "true", "yes", "on"}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    return cp


def loads_topology(text: str) -> TopologySpec:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed topology config: {exc}") from exc

    name = cp.get("topology", "name", fallback="topology")
    vertices = []
    for section in cp.sections():
        if not section.startswith("task:"):
            continue
        s = cp[section]
        try:
            params = json.loads(s.get("params", "{}"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"[{section}] params is not valid JSON: {exc}") from exc
        schema = s.get("schema")
        vertices.append(
            TaskDescriptor(
                name=section[len("task:"):].strip(),
                pattern=Pattern.parse(s.get("pattern", "transform")),
                parallelism=int(s.get("parallelism", "1")),
                selectivity=s.get("selectivity", ""),
                stateful=s.get("stateful", "false").strip().lower() in _TRUE,
                params=params,
                kind=s.get("kind"),
                schema=None if schema is None else tuple(f.strip() for f in schema.split(",") if f.strip()),
            )
        )

    edges = []
    if cp.has_section("edges"):
        for key, mode in cp["edges"].items():
            if "->" not in key:
                raise ConfigError(f"edge {key!r} must read 'src -> dst'")
            src, dst = (p.strip() for p in key.split("->", 1))
            try:
                edges.append(Edge(src, dst, RoutingMode.parse(mode)))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    return define_topology(vertices, edges, name=name)


def load_topology(path: str | Path) -> TopologySpec:
    return loads_topology(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, WindowSpec):
        return {"kind": obj.kind, "width": obj.width, "keyed": obj.keyed}
    raise TypeError(f"{type(obj).__name__} is not serializable in a topology config")


def dumps_topology(spec: TopologySpec) -> str:
    """Serialize ``spec``; programmatic ``factory`` callables are not representable."""
    cp = _parser()
    cp["topology"] = {"name": spec.name}
    for v in spec.vertices:
        sec = {
            "pattern": v.pattern.value,
            "parallelism": str(v.parallelism),
            "selectivity": v.selectivity,
            "stateful": "true" if v.stateful else "false",
            "params": json.dumps(dict(v.params), sort_keys=True, default=_json_default),
        }
        if v.kind:
            sec["kind"] = v.kind
        if v.schema is not None:
            sec["schema"] = ", ".join(v.schema)
        cp[f"task:{v.name}"] = sec
    cp["edges"] = {f"{e.src} -> {e.dst}": str(e.mode) for e in spec.edges}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
