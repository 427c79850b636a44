"""Separate-chaining hash table instrumented for collisions and probe lengths."""

from __future__ import annotations

import time
from array import array
from dataclasses import dataclass, field

import numpy as np

from ..telemetry import CounterDelta, counter_delta, sample_counters

MASK64 = (1 << 64) - 1
MULTIPLY_SHIFT_A = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

NODE_BYTES = 48
BUCKET_BYTES = 8
MAX_BUCKET_LOG2 = 30

HASH_FNS = ("multiply_shift", "fnv1a")


@dataclass(frozen=True)
class HashTableConfig:
    bucket_count_log2: int = 4
    max_load_factor: float = 2.0
    growth_log2: int = 1
    hash_fn: str = "multiply_shift"
    resizing_enabled: bool = True

    def __post_init__(self) -> None:
        if not 0 <= self.bucket_count_log2 <= 24:
            raise ValueError("bucket_count_log2 must be in [0, 24]")
        if not 0.25 <= self.max_load_factor <= 8.0:
            raise ValueError("max_load_factor must be in [0.25, 8.0]")
        if not 1 <= self.growth_log2 <= 3:
            raise ValueError("growth_log2 must be in [1, 3]")
        if self.hash_fn not in HASH_FNS:
            raise ValueError(f"hash_fn must be one of {HASH_FNS}")


@dataclass(frozen=True)
class HashWorkload:
    n_keys: int = 10_000
    key_dist: str = "uniform"
    zipf_s: float = 1.1
    read_fraction: float = 0.9
    n_ops: int | None = None  # mixed operations after the insert phase; defaults to n_keys

    def __post_init__(self) -> None:
        if self.key_dist not in ("uniform", "zipf"):
            raise ValueError("key_dist must be 'uniform' or 'zipf'")
        if self.n_keys < 0 or not 0.0 <= self.read_fraction <= 1.0:
            raise ValueError("invalid hashtable workload")
        if self.key_dist == "zipf" and self.zipf_s <= 0:
            raise ValueError("zipf_s must be positive")

    @property
    def ops(self) -> int:
        return self.n_keys if self.n_ops is None else self.n_ops


@dataclass
class HashTableMetrics:
    collisions: int = 0
    inserts: int = 0
    probe_len: list[int] = field(default_factory=list)
    op_latency_ns: list[int] = field(default_factory=list)
    resident_bytes: int = 0
    bucket_count: int = 0
    size: int = 0

    @property
    def mean_probe_len(self) -> float:
        return sum(self.probe_len) / len(self.probe_len) if self.probe_len else 0.0


def multiply_shift(key: int, log2: int) -> int:
    if log2 == 0:
        return 0
    return ((key * MULTIPLY_SHIFT_A) & MASK64) >> (64 - log2)


def fnv1a(key: int, log2: int) -> int:
    h = FNV_OFFSET
    for _ in range(8):
        h = ((h ^ (key & 0xFF)) * FNV_PRIME) & MASK64
        key >>= 8
    return h & ((1 << log2) - 1)


class ChainedHashTable:
    """Chains are singly linked lists of node indices; new nodes go at the tail."""

    def __init__(self, config: HashTableConfig):
        self.config = config
        self.log2 = config.bucket_count_log2
        self._hash = multiply_shift if config.hash_fn == "multiply_shift" else fnv1a
        self.heads = array("i", [-1]) * (1 << self.log2)
        self.keys: list[int] = []
        self.values: list = []
        self.next: list[int] = []
        self.collisions = 0
        self.inserts = 0
        self.resizes = 0

    @property
    def bucket_count(self) -> int:
        return 1 << self.log2

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def resident_bytes(self) -> int:
        return self.bucket_count * BUCKET_BYTES + len(self.keys) * NODE_BYTES

    def lookup(self, key: int) -> tuple[bool, object, int]:
        """(found, value, nodes examined)."""
        node = self.heads[self._hash(key, self.log2)]
        probes = 0
        keys, nxt = self.keys, self.next
        while node != -1:
            probes += 1
            if keys[node] == key:
                return True, self.values[node], probes
            node = nxt[node]
        return False, None, probes

    def insert(self, key: int, value) -> int:
        """Insert or update; returns nodes examined."""
        b = self._hash(key, self.log2)
        node = self.heads[b]
        keys, nxt = self.keys, self.next
        probes, last = 0, -1
        while node != -1:
            probes += 1
            if keys[node] == key:
                self.values[node] = value
                return probes
            last, node = node, nxt[node]
        idx = len(keys)
        keys.append(key)
        self.values.append(value)
        nxt.append(-1)
        self.inserts += 1
        if last == -1:
            self.heads[b] = idx
        else:
            self.collisions += 1
            nxt[last] = idx
        if self.config.resizing_enabled and len(keys) > self.config.max_load_factor * self.bucket_count:
            self._grow()
        return probes

    def _grow(self) -> None:
        new_log2 = min(MAX_BUCKET_LOG2, self.log2 + self.config.growth_log2)
        if new_log2 == self.log2:
            return
        self.log2 = new_log2
        self.resizes += 1
        heads = array("i", [-1]) * (1 << new_log2)
        tails = {}
        nxt = self.next
        for idx, key in enumerate(self.keys):
            b = self._hash(key, new_log2)
            nxt[idx] = -1
            prev = tails.get(b)
            if prev is None:
                heads[b] = idx
            else:
                nxt[prev] = idx
            tails[b] = idx
        self.heads = heads


def _distinct_keys(rng: np.random.Generator, n: int) -> list[int]:
    keys: list[int] = []
    seen: set[int] = set()
    while len(keys) < n:
        for k in rng.integers(0, 2**63, size=n - len(keys), dtype=np.int64).tolist():
            if k not in seen:
                seen.add(k)
                keys.append(k)
    return keys


def workload_keys(workload: HashWorkload, seed: int) -> tuple[list[int], list[int], list[bool]]:
    """(insert keys, mixed-op keys, mixed-op is_read): a pure function of (workload, seed)."""
    rng = np.random.default_rng(seed)
    universe_size = max(1, 2 * workload.n_keys)
    universe = _distinct_keys(rng, universe_size)
    inserts = universe[: workload.n_keys]
    n_ops = workload.ops
    if workload.key_dist == "uniform":
        idx = rng.integers(0, universe_size, size=n_ops)
    else:
        ranks = np.arange(1, universe_size + 1, dtype=float)
        p = ranks ** -workload.zipf_s
        idx = rng.permutation(universe_size)[rng.choice(universe_size, size=n_ops, p=p / p.sum())]
    reads = (rng.random(n_ops) < workload.read_fraction).tolist()
    return inserts, [universe[i] for i in idx.tolist()], reads


def hashtable_run(
    config: HashTableConfig, workload: HashWorkload, seed: int = 0
) -> tuple[HashTableMetrics, CounterDelta]:
    """Insert ``n_keys`` distinct keys, then run the mixed read/upsert phase with per-op probe and latency samples."""
    inserts, op_keys, reads = workload_keys(workload, seed)
    before = sample_counters(reset_peak=True)
    table = ChainedHashTable(config)
    for i, key in enumerate(inserts):
        table.insert(key, i)
    probe_len, latency = [], []
    clock = time.perf_counter_ns
    for i, (key, is_read) in enumerate(zip(op_keys, reads)):
        t0 = clock()
        if is_read:
            probes = table.lookup(key)[2]
        else:
            probes = table.insert(key, -i)
        latency.append(clock() - t0)
        probe_len.append(probes)
    after = sample_counters()
    metrics = HashTableMetrics(
        collisions=table.collisions,
        inserts=table.inserts,
        probe_len=probe_len,
        op_latency_ns=latency,
        resident_bytes=table.resident_bytes,
        bucket_count=table.bucket_count,
        size=len(table),
    )
    return metrics, counter_delta(before, after)
