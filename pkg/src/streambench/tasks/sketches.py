"""Probabilistic summaries: Bloom filter, LogLog distinct counter, AMS F2 sketch."""

from __future__ import annotations

import hashlib
import math
from functools import lru_cache
from typing import Any, Hashable, Iterable

import numpy as np

from ..engine.routing import canonical_string


def _digest(value: Any, salt: bytes, size: int) -> bytes:
    return hashlib.blake2b(canonical_string(value).encode("utf-8"), digest_size=size, key=salt).digest()


class BloomFilter:
    """m-bit Bloom filter with k indices from double hashing of one 128-bit digest."""

    def __init__(self, m: int = 1 << 16, k: int = 7, seed: int = 0):
        if m <= 0 or k <= 0:
            raise ValueError("m and k must be positive")
        self.m = m
        self.k = k
        self.n = 0
        self.seed = seed
        self._salt = seed.to_bytes(8, "little", signed=False)
        self.bits = bytearray((m + 7) // 8)

    def _indices(self, item: Any) -> list[int]:
        d = _digest(item, self._salt, 16)
        h1 = int.from_bytes(d[:8], "little")
        h2 = int.from_bytes(d[8:], "little") | 1
        m = self.m
        return [(h1 + i * h2) % m for i in range(self.k)]

    def add(self, item: Any) -> None:
        for i in self._indices(item):
            self.bits[i >> 3] |= 1 << (i & 7)
        self.n += 1

    def __contains__(self, item: Any) -> bool:
        bits = self.bits
        return all(bits[i >> 3] & (1 << (i & 7)) for i in self._indices(item))

    def theoretical_fpr(self, n: int | None = None) -> float:
        n = self.n if n is None else n
        return (1.0 - math.exp(-self.k * n / self.m)) ** self.k

    @classmethod
    def train(cls, whitelist: Iterable[Any], m: int = 1 << 16, k: int = 7, seed: int = 0) -> BloomFilter:
        bf = cls(m, k, seed)
        for item in whitelist:
            bf.add(item)
        return bf


# Durand-Flajolet asymptotic constant
LOGLOG_ALPHA_INF = 0.39701


@lru_cache(maxsize=None)
def loglog_alpha(m: int) -> float:
    """Bias constant alpha_m = (Gamma(-1/m) * (1 - 2^(1/m)) / ln 2)^(-m)."""
    x = math.gamma(-1.0 / m) * (1.0 - 2.0 ** (1.0 / m)) / math.log(2.0)
    return x ** (-m)


class LogLog:
    """LogLog distinct-count sketch with 2^b buckets (standard error ~1.30/sqrt(m))."""

    def __init__(self, b: int = 10, seed: int = 0):
        if not 4 <= b <= 16:
            raise ValueError("precision b must be in [4, 16]")
        self.b = b
        self.m = 1 << b
        self._salt = seed.to_bytes(8, "little", signed=False)
        self.registers = bytearray(self.m)
        self._sum = 0
        self._alpha = loglog_alpha(self.m)
        self._width = 64 - b

    def add(self, value: Any) -> None:
        h = int.from_bytes(_digest(value, self._salt, 8), "little")
        j = h & (self.m - 1)
        w = h >> self.b
        # rank = position of the lowest set bit, 1-based
        rank = (w & -w).bit_length() if w else self._width + 1
        old = self.registers[j]
        if rank > old:
            self.registers[j] = rank
            self._sum += rank - old

    def estimate(self) -> float:
        """LogLog estimate; below 2.5 m it is capped by linear counting.

        The raw estimator is badly biased while most registers are still
        empty (one distinct value reads as ~0.4 m); linear counting over the
        empty registers is accurate there. Both only grow as items arrive,
        and past the threshold the raw value exceeds anything the capped
        range can return, so the estimate is monotone.
        """
        if self._sum == 0:
            return 0.0
        raw = self._alpha * self.m * 2.0 ** (self._sum / self.m)
        empty = self.registers.count(0)
        if raw <= 2.5 * self.m and empty:
            return min(raw, self.m * math.log(self.m / empty))
        return raw

    @property
    def standard_error(self) -> float:
        return 1.30 / math.sqrt(self.m)


class AmsSketch:
    """AMS second-moment (F2) sketch.

    ``rows`` independent sign hashes; each row spreads items over ``buckets``
    counters and its squared sum sum_b z_b^2 is an unbiased F2 estimate. The
    estimate is the median over rows. With ``buckets=1`` every row is a
    single tug-of-war sum, the textbook form.
    """

    def __init__(self, rows: int = 16, buckets: int = 64, seed: int = 0):
        if rows < 1 or rows > 16:
            raise ValueError("rows must be in [1, 16]")
        if buckets < 1 or buckets > (1 << 31):
            raise ValueError("buckets must be in [1, 2^31]")
        self.rows = rows
        self.buckets = buckets
        self._salt = seed.to_bytes(8, "little", signed=False)
        self.z = np.zeros((rows, buckets), dtype=np.int64)
        self._row_idx = np.arange(rows)
        self._cache: dict[Hashable, tuple[np.ndarray, np.ndarray]] = {}

    def _hashes(self, item: Any) -> tuple[np.ndarray, np.ndarray]:
        key = canonical_string(item)
        hit = self._cache.get(key)
        if hit is None:
            raw = np.frombuffer(_digest(key, self._salt, 64), dtype="<u4")[: self.rows].astype(np.int64)
            signs = np.where(raw & 1, 1, -1)
            cols = (raw >> 1) % self.buckets
            hit = (cols, signs)
            if len(self._cache) < 1 << 16:
                self._cache[key] = hit
        return hit

    def add(self, item: Any, count: int = 1) -> None:
        cols, signs = self._hashes(item)
        self.z[self._row_idx, cols] += signs * count

    def row_estimates(self) -> np.ndarray:
        return (self.z.astype(float) ** 2).sum(axis=1)

    def estimate(self) -> float:
        return float(np.median(self.row_estimates()))
