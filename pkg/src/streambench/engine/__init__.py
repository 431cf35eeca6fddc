"""Embedded dataflow engine: topologies, routing, windows and the threaded executor."""

from .config import dumps_topology, load_topology, loads_topology
from .message import Message, make_message
from .routing import DUPLICATE, SHUFFLE, HashBy, Router, RoutingMode, route, stable_hash
from .runtime import Engine, EngineConfig, execute, run_tasks_serially
from .task import AggregateTask, FunctionTask, NullSink, SourceTask, Task, TaskContext
from .topology import Edge, Pattern, TaskDescriptor, TopologySpec, define_topology
from .windows import WindowSpec, WindowState, window_accumulate

__all__ = [
    "AggregateTask",
    "DUPLICATE",
    "Edge",
    "Engine",
    "EngineConfig",
    "FunctionTask",
    "HashBy",
    "Message",
    "NullSink",
    "Pattern",
    "Router",
    "RoutingMode",
    "SHUFFLE",
    "SourceTask",
    "Task",
    "TaskContext",
    "TaskDescriptor",
    "TopologySpec",
    "WindowSpec",
    "WindowState",
    "define_topology",
    "dumps_topology",
    "execute",
    "load_topology",
    "loads_topology",
    "make_message",
    "route",
    "run_tasks_serially",
    "stable_hash",
    "window_accumulate",
]
