from __future__ import annotations

from contextlib import contextmanager

import pytest

from streambench.engine import EngineConfig, Message, make_message
from streambench.workload.model import StreamWorkload

T0 = 1_420_070_400_000


def msgs(n: int, sensors: int = 1, step_ms: int = 10, field: str = "value", start: int = T0) -> list[Message]:
    """``n`` messages with value i, round-robin over ``sensors`` ids."""
    return [make_message(f"s{i % sensors}", start + i * step_ms, {field: float(i)}) for i in range(n)]


def workload(n: int, sensors: int = 1, step_ms: int = 10, **kw) -> StreamWorkload:
    return StreamWorkload.from_messages(msgs(n, sensors, step_ms, **kw), name="test")


def fast_config(**over) -> EngineConfig:
    """No utilization sampling; keeps unit runs quick."""
    base = dict(utilization_ms=None, queue_sample_ms=None, keep_sink_messages=True)
    base.update(over)
    return EngineConfig(**base)


@pytest.fixture
def fast():
    return fast_config()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


@contextmanager
def criterion(number: int, title: str):
    try:
        yield
    except BaseException as exc:
        line = f"criterion {number:2d} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0]
        ACCEPTANCE.append(line)
        print(line)
        raise
    line = f"criterion {number:2d} PASS  {title}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
