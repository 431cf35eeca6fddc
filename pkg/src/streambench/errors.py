"""Exception hierarchy shared by every subpackage.

Configuration problems derive from :class:`ConfigError` so the CLI can map
them to exit code 2; everything raised while a benchmark is running derives
from :class:`RuntimeFailure` (exit code 3).
"""

from __future__ import annotations


class BenchError(Exception):
    """Base class for all errors raised by streambench."""


class ConfigError(BenchError):
    """Invalid topology, workload or run configuration."""


class RuntimeFailure(BenchError):
    """Failure while executing a benchmark."""


# -- topology ---------------------------------------------------------------


class TopologyError(ConfigError):
    pass


class CycleWithoutSource(TopologyError):
    pass


class DanglingEdge(TopologyError):
    pass


class HashFieldUnknown(TopologyError):
    pass


class StatefulParallelWithoutHash(TopologyError):
    pass


# -- engine runtime -----------------------------------------------------------


class MissingHashField(RuntimeFailure, KeyError):
    pass


class TaskPanicked(RuntimeFailure):
    def __init__(self, name: str, cause: BaseException):
        super().__init__(f"task {name!r} failed: {cause!r}")
        self.name = name
        self.cause = cause


class QueueOverflowPolicyViolated(RuntimeFailure):
    pass


# -- workload -------------------------------------------------------------------


class SchemaMismatch(ConfigError):
    pass


class EmptyFile(ConfigError):
    pass


class InsufficientSpan(ConfigError):
    pass


# -- metrics ----------------------------------------------------------------------


class OrphanSinkEvent(RuntimeFailure):
    pass


class DivisionGuard(RuntimeFailure, ZeroDivisionError):
    pass


class SamplerUnavailable(RuntimeFailure):
    pass


class NeverStable(RuntimeFailure):
    pass


class IoFailure(RuntimeFailure):
    pass


# -- tasks --------------------------------------------------------------------------


class TaskError(RuntimeFailure):
    """Raised by a task on input it cannot process."""


class MalformedSenml(TaskError):
    pass


class MalformedXml(TaskError):
    pass


class MissingField(TaskError, KeyError):
    pass


class NonNumericField(TaskError, TypeError):
    pass


class SingularDesignMatrix(TaskError):
    pass


class EmptyBatch(TaskError):
    pass


# -- services -------------------------------------------------------------------------


class BlobNotFound(RuntimeFailure, KeyError):
    pass


class RowNotFound(RuntimeFailure, KeyError):
    pass


class TopicClosed(RuntimeFailure):
    pass


class FileMissing(RuntimeFailure, FileNotFoundError):
    pass


class DestinationUnwritable(RuntimeFailure, PermissionError):
    pass


# -- apps ---------------------------------------------------------------------------------


class UnknownTask(ConfigError, KeyError):
    pass


class ConfigIncomplete(ConfigError):
    pass


class RateUnknown(ConfigError, KeyError):
    pass
