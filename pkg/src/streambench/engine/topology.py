"""Dataflow graph description and validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from ..errors import (
    CycleWithoutSource,
    DanglingEdge,
    HashFieldUnknown,
    StatefulParallelWithoutHash,
    TopologyError,
)
from .message import INTRINSIC_KEYS
from .routing import SHUFFLE, RoutingMode
from .windows import WindowSpec


class Pattern(str, enum.Enum):
    SOURCE = "source"
    SINK = "sink"
    TRANSFORM = "transform"
    FILTER = "filter"
    FLATMAP = "flatmap"
    AGGREGATE = "aggregate"

    @classmethod
    def parse(cls, text: str | Pattern) -> Pattern:
        if isinstance(text, Pattern):
            return text
        return cls(text.strip().lower().replace("_", "").replace(" ", "").replace("-", ""))


_DEFAULT_SELECTIVITY = {
    Pattern.SOURCE: "0:N",
    Pattern.SINK: "N:0",
    Pattern.TRANSFORM: "1:1",
    Pattern.FILTER: "1:0/1",
    Pattern.FLATMAP: "1:N",
    Pattern.AGGREGATE: "N:1",
}


@dataclass(frozen=True)
class TaskDescriptor:
    """One vertex of a dataflow.

    ``kind`` names the task implementation in the catalog; ``factory``
    overrides it for tasks built programmatically. ``schema`` lists the
    fields this task adds to its output (``None`` = only passes upstream
    fields through).
    """

    name: str
    pattern: Pattern = Pattern.TRANSFORM
    parallelism: int = 1
    selectivity: str = ""
    stateful: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)
    kind: str | None = None
    factory: Callable[[Mapping[str, Any]], Any] | None = field(default=None, compare=False)
    schema: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", Pattern.parse(self.pattern))
        if not self.selectivity:
            object.__setattr__(self, "selectivity", _DEFAULT_SELECTIVITY[self.pattern])
        if self.parallelism < 1:
            raise TopologyError(f"{self.name}: parallelism must be a positive integer")
        if self.pattern is Pattern.SOURCE and not self.selectivity.startswith("0:"):
            raise TopologyError(f"{self.name}: source selectivity must be 0:N")
        if self.pattern is Pattern.SINK and not self.selectivity.endswith(":0"):
            raise TopologyError(f"{self.name}: sink selectivity must be N:0")

    @property
    def window(self) -> WindowSpec | None:
        raw = self.params.get("window")
        return None if raw is None else WindowSpec.from_params(raw)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    mode: RoutingMode = SHUFFLE

    def __str__(self) -> str:
        return f"{self.src} -> {self.dst} [{self.mode}]"


@dataclass(frozen=True)
class TopologySpec:
    vertices: tuple[TaskDescriptor, ...]
    edges: tuple[Edge, ...]
    name: str = "topology"

    def vertex(self, name: str) -> TaskDescriptor:
        for v in self.vertices:
            if v.name == name:
                return v
        raise KeyError(name)

    def in_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == name]

    def out_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.src == name]

    @property
    def sources(self) -> list[TaskDescriptor]:
        return [v for v in self.vertices if v.pattern is Pattern.SOURCE]

    @property
    def sinks(self) -> list[TaskDescriptor]:
        return [v for v in self.vertices if v.pattern is Pattern.SINK]

    def topo_order(self) -> list[str]:
        indeg = {v.name: 0 for v in self.vertices}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = [n for n, d in indeg.items() if d == 0]
        order: list[str] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for e in self.out_edges(n):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
        return order

    def output_schema(self, name: str) -> frozenset[str]:
        """Fields visible on the output of ``name`` (intrinsic keys excluded)."""
        memo: dict[str, frozenset[str]] = {}

        def visit(n: str) -> frozenset[str]:
            if n not in memo:
                memo[n] = frozenset()  # cycle guard
                v = self.vertex(n)
                inherited: frozenset[str] = frozenset()
                for e in self.in_edges(n):
                    inherited |= visit(e.src)
                memo[n] = inherited | frozenset(v.schema or ())
            return memo[n]

        return visit(name)


def define_topology(
    vertices: Iterable[TaskDescriptor],
    edges: Iterable[Edge | tuple],
    name: str = "topology",
) -> TopologySpec:
    """Validate and freeze a dataflow graph."""
    verts = tuple(vertices)
    edge_list = tuple(e if isinstance(e, Edge) else Edge(*e) for e in edges)

    names = [v.name for v in verts]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise TopologyError(f"duplicate vertex names: {dupes}")
    if not verts:
        raise CycleWithoutSource("empty graph")
    known = set(names)
    for e in edge_list:
        if e.src not in known or e.dst not in known:
            raise DanglingEdge(f"edge {e} references an unknown vertex")
        if e.src == e.dst:
            raise TopologyError(f"self loop on {e.src!r}; cycles are not supported")

    spec = TopologySpec(verts, edge_list, name)

    roots = [v for v in verts if not spec.in_edges(v.name)]
    leaves = [v for v in verts if not spec.out_edges(v.name)]
    if not roots:
        raise CycleWithoutSource("graph has no vertex without in-edges to act as a source")
    if not leaves:
        raise TopologyError("graph has no sink (every vertex has out-edges)")
    if len(spec.topo_order()) != len(verts):
        raise TopologyError("graph contains a cycle; cycles are not supported")
    _check_connected(spec)

    for v in verts:
        has_in, has_out = bool(spec.in_edges(v.name)), bool(spec.out_edges(v.name))
        if v.pattern is Pattern.SOURCE and has_in:
            raise TopologyError(f"source {v.name!r} has in-edges")
        if v.pattern is not Pattern.SOURCE and not has_in:
            raise CycleWithoutSource(f"{v.name!r} has no in-edges but is not a source")
        if v.pattern is Pattern.SINK and has_out:
            raise TopologyError(f"sink {v.name!r} has out-edges")
        if v.pattern is not Pattern.SINK and not has_out:
            raise TopologyError(f"{v.name!r} has no out-edges but is not a sink")
        if v.pattern is Pattern.AGGREGATE and v.window is None:
            raise TopologyError(f"aggregate task {v.name!r} declares no window in params")

    for e in edge_list:
        dst = spec.vertex(e.dst)
        if dst.stateful and dst.parallelism > 1 and e.mode.kind != "hash":
            raise StatefulParallelWithoutHash(
                f"{e.dst!r} is stateful with parallelism {dst.parallelism}; in-edge from {e.src!r} must hash"
            )
        if e.mode.kind == "hash" and e.mode.field not in INTRINSIC_KEYS:
            if e.mode.field not in spec.output_schema(e.src):
                raise HashFieldUnknown(f"{e}: field {e.mode.field!r} not declared upstream of {e.dst!r}")
    return spec


def _check_connected(spec: TopologySpec) -> None:
    adj: dict[str, set[str]] = {v.name: set() for v in spec.vertices}
    for e in spec.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)
    start = spec.vertices[0].name
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(adj):
        missing = sorted(set(adj) - seen)
        raise TopologyError(f"graph is not connected; unreachable: {missing}")
