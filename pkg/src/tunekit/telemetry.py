"""Application metric events and OS resource counters.

Concurrency: a :class:`TelemetrySink` funnels every producer of the
component->agent ring through one lock, so the ring keeps exactly one
producer at a time no matter how many workers call :meth:`record_event`.
The lock is uncontended for single-threaded components; the hot path never
waits on the consumer, because a full ring drops the event.
"""

from __future__ import annotations

import math
import os
import resource
import sys
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .channel import FrameError, MsgType, Ring, Telemetry, decode_frame, encode_telemetry_frame
from .tunables import ComponentSpec


@dataclass(frozen=True)
class MetricAggregate:
    metric_id: int
    count: int
    sum: float
    min: float
    max: float
    p50: float
    p95: float
    p99: float
    name: str = ""

    @property
    def mean(self) -> float:
        return self.sum / self.count

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "MetricAggregate":
        return cls(**doc)


def nearest_rank(sorted_values: Sequence[float], p: float) -> float:
    n = len(sorted_values)
    rank = max(1, math.ceil(p / 100.0 * n))
    return sorted_values[rank - 1]


def aggregate(samples: Iterable[float], metric_id: int = 0, name: str = "") -> MetricAggregate:
    values = sorted(float(v) for v in samples)
    if not values:
        raise ValueError("cannot aggregate an empty sample set")
    return MetricAggregate(
        metric_id=metric_id,
        count=len(values),
        sum=math.fsum(values),
        min=values[0],
        max=values[-1],
        p50=nearest_rank(values, 50),
        p95=nearest_rank(values, 95),
        p99=nearest_rank(values, 99),
        name=name,
    )


class UndeclaredMetric(KeyError):
    pass


class TelemetrySink:
    """Component-side emitter for TELEMETRY frames (and any other upstream frame)."""

    def __init__(self, spec: ComponentSpec, ring: Ring):
        self.spec = spec
        self.ring = ring
        self._declared = {m.metric_id for m in spec.metrics}
        self._lock = threading.Lock()
        self.emitted: dict[int, int] = defaultdict(int)
        self.dropped: dict[int, int] = defaultdict(int)

    def record_event(self, metric_id: int, value: float, timestamp_ns: int | None = None) -> None:
        if metric_id not in self._declared:
            raise UndeclaredMetric(metric_id)
        if timestamp_ns is None:
            timestamp_ns = time.monotonic_ns()
        frame = encode_telemetry_frame(self.spec.component_id, metric_id, timestamp_ns, float(value))
        with self._lock:
            self.emitted[metric_id] += 1
            if not self.ring.push(frame):
                self.dropped[metric_id] += 1

    def record(self, metric: str, value: float) -> None:
        self.record_event(self.spec.metric(metric).metric_id, value)

    def push_frame(self, frame: bytes) -> int | None:
        """Push a non-telemetry frame under the producer lock; return its sequence number or None if full."""
        with self._lock:
            seq = self.ring.head
            return seq if self.ring.push(frame) else None

    @property
    def total_dropped(self) -> int:
        return sum(self.dropped.values())


def record_event(sink: TelemetrySink, component_id: int, metric_id: int, value: float, timestamp_ns: int) -> None:
    if component_id != sink.spec.component_id:
        raise ValueError(f"sink serves component {sink.spec.component_id}, not {component_id}")
    sink.record_event(metric_id, value, timestamp_ns)


class TelemetryCollector:
    """Agent-side accumulation of TELEMETRY samples, keyed by metric_id."""

    def __init__(self, spec: ComponentSpec):
        self.spec = spec
        self.samples: dict[int, list[float]] = defaultdict(list)
        self.received = 0
        self.bad_frames = 0

    def add(self, t: Telemetry) -> None:
        if t[0] != self.spec.component_id:
            self.bad_frames += 1
            return
        self.samples[t[1]].append(t[3])
        self.received += 1

    def add_frame(self, frame: bytes) -> int | None:
        """Consume one frame; return its msg_type (None for corrupt frames)."""
        try:
            msg_type, payload = decode_frame(frame)
            if msg_type == MsgType.TELEMETRY:
                self.add(Telemetry.unpack(payload))
            return msg_type
        except FrameError:
            self.bad_frames += 1
            return None

    def aggregates(self) -> dict[str, MetricAggregate]:
        out = {}
        for m in self.spec.metrics:
            values = self.samples.get(m.metric_id)
            if values:
                out[m.name] = aggregate(values, m.metric_id, m.name)
        return out


# -- OS counters ----------------------------------------------------------------

_HAS_CLEAR_REFS = sys.platform.startswith("linux") and os.path.exists("/proc/self/clear_refs")


@dataclass(frozen=True)
class CounterSnapshot:
    wall_ns: int
    cpu_ns: int
    max_rss_bytes: int | None = None
    ctx_switches: int | None = None


@dataclass(frozen=True)
class CounterDelta:
    wall_ns: int
    cpu_ns: int
    max_rss_bytes: int | None = None
    ctx_switches: int | None = None

    def to_doc(self) -> dict:
        """Only measured fields; absent counters are omitted, never zero-filled."""
        return {k: v for k, v in asdict(self).items() if v is not None}


class PortableCounters:
    """Default provider: monotonic wall clock, CPU time, peak RSS, context switches.

    CPU time is user+system of this process plus its reaped children, so
    benchmarks that fork workers and join them before sampling are covered.

    Peak RSS comes from ``VmHWM``.  On Linux the high-water mark can be reset
    through ``/proc/self/clear_refs``; ``sample(reset_peak=True)`` does that
    first, so a later sample reports the peak reached since.  Elsewhere the
    lifetime peak from ``getrusage`` is used and deltas may read 0.
    """

    def __init__(self):
        self._can_reset = _HAS_CLEAR_REFS

    def sample(self, reset_peak: bool = False) -> CounterSnapshot:
        if reset_peak and self._can_reset:
            try:
                with open("/proc/self/clear_refs", "w") as f:
                    f.write("5")
            except OSError:
                self._can_reset = False
        usage = resource.getrusage(resource.RUSAGE_SELF)
        children = resource.getrusage(resource.RUSAGE_CHILDREN)
        return CounterSnapshot(
            wall_ns=time.monotonic_ns(),
            cpu_ns=time.process_time_ns() + int((children.ru_utime + children.ru_stime) * 1e9),
            max_rss_bytes=self._peak_rss(usage),
            ctx_switches=usage.ru_nvcsw + usage.ru_nivcsw,
        )

    @staticmethod
    def _peak_rss(usage) -> int | None:
        try:
            with open("/proc/self/status") as f:
                for line in f:
                    if line.startswith("VmHWM:"):
                        return int(line.split()[1]) * 1024
        except OSError:
            pass
        # ru_maxrss is KiB on Linux, bytes on macOS
        return usage.ru_maxrss if sys.platform == "darwin" else usage.ru_maxrss * 1024


_default_provider = PortableCounters()


def sample_counters(reset_peak: bool = False, provider=None) -> CounterSnapshot:
    return (provider or _default_provider).sample(reset_peak=reset_peak)


def counter_delta(before: CounterSnapshot, after: CounterSnapshot) -> CounterDelta:
    def opt(a, b, clamp=False):
        if a is None or b is None:
            return None
        return max(0, b - a) if clamp else b - a

    return CounterDelta(
        wall_ns=after.wall_ns - before.wall_ns,
        cpu_ns=after.cpu_ns - before.cpu_ns,
        max_rss_bytes=opt(before.max_rss_bytes, after.max_rss_bytes, clamp=True),
        ctx_switches=opt(before.ctx_switches, after.ctx_switches),
    )
