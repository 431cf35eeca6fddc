"""Edge routing: duplicate, round-robin shuffle and hash-by-field."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Sequence, TypeVar

from ..errors import MissingHashField
from .message import Message

E = TypeVar("E")

_ABSENT = object()


@dataclass(frozen=True)
class RoutingMode:
    kind: str  # "duplicate" | "shuffle" | "hash"
    field: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("duplicate", "shuffle", "hash"):
            raise ValueError(f"unknown routing kind {self.kind!r}")
        if (self.kind == "hash") != (self.field is not None):
            raise ValueError("hash routing needs exactly one field name")

    def __str__(self) -> str:
        return f"hash({self.field})" if self.kind == "hash" else self.kind

    @classmethod
    def parse(cls, text: str) -> RoutingMode:
        t = text.strip()
        low = t.lower()
        if low in ("duplicate", "all", "broadcast"):
            return DUPLICATE
        if low in ("shuffle", "roundrobin", "round-robin"):
            return SHUFFLE
        for prefix in ("hash(", "hashby("):
            if low.startswith(prefix) and t.endswith(")"):
                return HashBy(t[len(prefix):-1].strip().strip("\"'"))
        raise ValueError(f"cannot parse routing mode {text!r}")


DUPLICATE = RoutingMode("duplicate")
SHUFFLE = RoutingMode("shuffle")


def HashBy(field: str) -> RoutingMode:  # noqa: N802 - reads like the mode it builds
    return RoutingMode("hash", field)


def canonical_string(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, float) and value.is_integer():
        # 3.0 and 3 are the same key
        return str(int(value))
    return repr(value)


@lru_cache(maxsize=1 << 16)
def _hash_str(s: str) -> int:
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


def stable_hash(value: Any) -> int:
    """64-bit hash of the value's canonical string form; identical across runs."""
    return _hash_str(canonical_string(value))


class Router:
    """Chooses target indices among ``fanout`` outputs for successive messages."""

    __slots__ = ("mode", "fanout", "_cursor", "_all")

    def __init__(self, mode: RoutingMode, fanout: int):
        if fanout < 1:
            raise ValueError("fanout must be positive")
        self.mode = mode
        self.fanout = fanout
        self._cursor = 0
        self._all = list(range(fanout))

    def select(self, msg: Message) -> list[int]:
        kind = self.mode.kind
        if kind == "duplicate" or self.fanout == 1 and kind != "hash":
            return self._all
        if kind == "shuffle":
            i = self._cursor
            self._cursor = (i + 1) % self.fanout
            return [i]
        value = msg.get(self.mode.field, _ABSENT)
        if value is _ABSENT:
            raise MissingHashField(f"message {msg.msg_id} lacks hash field {self.mode.field!r}")
        return [stable_hash(value) % self.fanout]


def route(msg: Message, out_edges: Sequence[E], router: Router) -> list[tuple[E, Message]]:
    """Pair ``msg`` with the edges selected by ``router``.

    Duplicate yields one pair per edge; shuffle and hash yield exactly one.
    """
    if not out_edges:
        raise ValueError("route needs at least one out edge")
    if router.fanout != len(out_edges):
        raise ValueError("router fanout does not match edge count")
    return [(out_edges[i], msg) for i in router.select(msg)]
