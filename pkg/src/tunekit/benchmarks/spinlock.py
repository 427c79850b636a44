"""Test-and-set spinlock with bounded polling and exponential backoff, under a light/heavy contention mix.

Workers are forked processes so lock contention is real parallel contention,
not interpreter-lock scheduling.  The test-and-set primitive is a
non-blocking acquire of a process-shared semaphore, which is atomic.
"""

from __future__ import annotations

import multiprocessing as mp
import os
import time
from array import array
from dataclasses import dataclass, replace

import numpy as np

from ..telemetry import CounterDelta, counter_delta, sample_counters

HEAVY_UNIT_OPS = 256
FAMILY_SIZE = 7
MAX_SPIN_UPPER = 2**20


@dataclass(frozen=True)
class SpinlockConfig:
    max_spin: int = 1024
    backoff_initial_us: int = 1
    backoff_cap_us: int = 1024

    def __post_init__(self) -> None:
        if not 0 <= self.max_spin <= MAX_SPIN_UPPER:
            raise ValueError("max_spin must be in [0, 2**20]")
        if not 1 <= self.backoff_initial_us <= 1024:
            raise ValueError("backoff_initial_us must be in [1, 1024]")
        if not 1 <= self.backoff_cap_us <= 65536:
            raise ValueError("backoff_cap_us must be in [1, 65536]")

    @property
    def effective_initial_us(self) -> int:
        # initial <= cap is a cross-parameter constraint the search space cannot express
        return min(self.backoff_initial_us, self.backoff_cap_us)


def hardware_parallelism() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class ContentionWorkload:
    k: int = 1
    n_light: int | None = None
    light_ops: int = 16
    duration_ms: int = 500
    acquisitions_per_worker: int | None = None  # fixed-count mode instead of duration

    def __post_init__(self) -> None:
        if not 1 <= self.k <= FAMILY_SIZE:
            raise ValueError("family index k must be in [1, 7]")

    @property
    def heavy_ops(self) -> int:
        return self.k * HEAVY_UNIT_OPS

    @property
    def light_workers(self) -> int:
        if self.n_light is not None:
            return self.n_light
        return max(2, hardware_parallelism() - 1)


def workload_family(base: ContentionWorkload = ContentionWorkload()) -> list[ContentionWorkload]:
    return [replace(base, k=k) for k in range(1, FAMILY_SIZE + 1)]


@dataclass
class SpinlockResult:
    throughput_ops_s: float
    acquisitions: int
    contended_acquisitions: int
    backoff_events: int
    p99_acquire_ns: float
    protected_counter: int
    elapsed_s: float
    workers: int
    low_fidelity: bool
    acquire_ns: np.ndarray

    def summary(self) -> dict:
        return {
            "throughput_ops_s": self.throughput_ops_s,
            "acquisitions": self.acquisitions,
            "contended_acquisitions": self.contended_acquisitions,
            "backoff_events": self.backoff_events,
            "p99_acquire_ns": self.p99_acquire_ns,
        }


def _work(x: int, n: int) -> int:
    for _ in range(n):
        x = (x * 1103515245 + 12345) & 0x7FFFFFFF
    return x


def _worker(lock, counter, barrier, conn, config: SpinlockConfig, ops: int, think_ops: int,
            duration_s: float, limit: int | None, seed: int) -> None:
    try_acquire = lambda: lock.acquire(False)  # noqa: E731
    release = lock.release
    clock = time.perf_counter_ns
    sleep = time.sleep
    max_spin = config.max_spin
    initial, cap = config.effective_initial_us, config.backoff_cap_us
    lat = array("q")
    acquisitions = contended = backoffs = 0
    x = seed & 0x7FFFFFFF
    barrier.wait()
    start = time.perf_counter()
    deadline = start + duration_s
    while True:
        if limit is not None:
            if acquisitions >= limit:
                break
        elif time.perf_counter() >= deadline:
            break
        t0 = clock()
        if not try_acquire():
            contended += 1
            delay = initial
            while True:
                got = False
                for _ in range(max_spin):
                    if try_acquire():
                        got = True
                        break
                if got:
                    break
                backoffs += 1
                sleep(delay * 1e-6)
                delay = min(delay * 2, cap)
                if try_acquire():
                    break
        lat.append(clock() - t0)
        value = counter.value  # deliberately non-atomic read-modify-write
        x = _work(x, ops)
        counter.value = value + 1
        release()
        acquisitions += 1
        x = _work(x, think_ops)
    elapsed = time.perf_counter() - start
    conn.send((acquisitions, contended, backoffs, elapsed, lat.tobytes()))
    conn.close()


def spinlock_run(config: SpinlockConfig, workload: ContentionWorkload, seed: int = 0) -> tuple[SpinlockResult, CounterDelta]:
    """Run one heavy and ``n_light`` light workers against one lock.

    Throughput counts lock acquisitions (critical sections completed) per
    second across all workers.  Counter deltas cover the parent process only.
    """
    ctx = mp.get_context("fork")
    lock = ctx.Lock()
    counter = ctx.RawValue("q", 0)
    n_workers = workload.light_workers + 1
    barrier = ctx.Barrier(n_workers + 1)
    procs, pipes = [], []
    for w in range(n_workers):
        recv, send = ctx.Pipe(duplex=False)
        ops = workload.heavy_ops if w == 0 else workload.light_ops
        p = ctx.Process(
            target=_worker,
            args=(lock, counter, barrier, send, config, ops, workload.light_ops,
                  workload.duration_ms / 1000.0, workload.acquisitions_per_worker, seed * 1000 + w),
            daemon=True,
        )
        p.start()
        send.close()
        procs.append(p)
        pipes.append(recv)
    before = sample_counters(reset_peak=True)
    barrier.wait()
    results = [conn.recv() for conn in pipes]
    for p in procs:
        p.join()
    after = sample_counters()
    acquisitions = sum(r[0] for r in results)
    elapsed = max(r[3] for r in results)
    lat = np.concatenate([np.frombuffer(r[4], dtype=np.int64) for r in results])
    p99 = float(np.sort(lat)[max(1, int(np.ceil(0.99 * lat.size))) - 1]) if lat.size else 0.0
    result = SpinlockResult(
        throughput_ops_s=acquisitions / elapsed if elapsed > 0 else 0.0,
        acquisitions=acquisitions,
        contended_acquisitions=sum(r[1] for r in results),
        backoff_events=sum(r[2] for r in results),
        p99_acquire_ns=p99,
        protected_counter=counter.value,
        elapsed_s=elapsed,
        workers=n_workers,
        low_fidelity=hardware_parallelism() < 2,
        acquire_ns=lat,
    )
    return result, counter_delta(before, after)

