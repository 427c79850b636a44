"""Instrumented benchmarks, each packaged as a tunable component.

A runner receives the component's current parameter values, the workload
block from the experiment config, a seed, and the component's telemetry sink.
It runs the workload and then reports metrics through the sink, so the
measured region is free of channel traffic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from ..telemetry import TelemetrySink
from ..tunables import ComponentSpec, MetricDef, TunableAssignment, TunableDef, encode_unit
from . import synthetic
from .hashtable import HashTableConfig, HashWorkload, hashtable_run
from .spinlock import ContentionWorkload, SpinlockConfig, spinlock_run, workload_family

Runner = Callable[[ComponentSpec, Mapping[str, Any], Mapping[str, Any], int, TelemetrySink], dict]


def hashtable_spec() -> ComponentSpec:
    return ComponentSpec(
        component_id=1,
        name="hashtable",
        tunables=(
            TunableDef("bucket_count_log2", 1, "integer", 0, 24, default=4),
            TunableDef("max_load_factor", 2, "real", 0.25, 8.0, scale="log", default=2.0),
            TunableDef("growth_log2", 3, "integer", 1, 3, default=1),
            TunableDef("hash_fn", 4, "categorical", categories=("multiply_shift", "fnv1a"), default="multiply_shift"),
        ),
        metrics=(
            MetricDef(1, "probe_len", "nodes"),
            MetricDef(2, "op_latency_ns", "ns"),
            MetricDef(3, "collisions", "count"),
            MetricDef(4, "resident_bytes", "bytes"),
        ),
    )


def spinlock_spec() -> ComponentSpec:
    return ComponentSpec(
        component_id=2,
        name="spinlock",
        tunables=(
            TunableDef("max_spin", 1, "integer", 0, 2**20, default=1024),
            TunableDef("backoff_initial_us", 2, "integer", 1, 1024, scale="log", default=1),
            TunableDef("backoff_cap_us", 3, "integer", 1, 65536, scale="log", default=1024),
        ),
        metrics=(
            MetricDef(1, "throughput_ops_s", "ops/s"),
            MetricDef(2, "acquisitions", "count"),
            MetricDef(3, "contended_acquisitions", "count"),
            MetricDef(4, "backoff_events", "count"),
            MetricDef(5, "p99_acquire_ns", "ns"),
        ),
    )


def synthetic_spec(dim: int = 2) -> ComponentSpec:
    return ComponentSpec(
        component_id=3,
        name="synthetic",
        tunables=tuple(TunableDef(f"x{i}", i + 1, "real", 0.0, 1.0, default=0.5) for i in range(dim)),
        metrics=(MetricDef(1, "value", ""),),
    )


def _hash_workload(doc: Mapping[str, Any]) -> HashWorkload:
    return HashWorkload(
        n_keys=int(doc.get("n_keys", 10_000)),
        key_dist=doc.get("key_dist", "uniform"),
        zipf_s=float(doc.get("zipf_s", 1.1)),
        read_fraction=float(doc.get("read_fraction", 0.9)),
        n_ops=doc.get("n_ops"),
    )


def run_hashtable(spec, values, workload, seed, sink):
    config = HashTableConfig(
        bucket_count_log2=values["bucket_count_log2"],
        max_load_factor=values["max_load_factor"],
        growth_log2=values["growth_log2"],
        hash_fn=values["hash_fn"],
        resizing_enabled=bool(workload.get("resizing_enabled", True)),
    )
    metrics, counters = hashtable_run(config, _hash_workload(workload), seed)
    for probes, ns in zip(metrics.probe_len, metrics.op_latency_ns):
        sink.record("probe_len", probes)
        sink.record("op_latency_ns", ns)
    sink.record("collisions", metrics.collisions)
    sink.record("resident_bytes", metrics.resident_bytes)
    return {"bucket_count": metrics.bucket_count, "size": metrics.size}


def contention_workload(doc: Mapping[str, Any]) -> ContentionWorkload:
    return ContentionWorkload(
        k=int(doc.get("family_k", doc.get("k", 1))),
        n_light=doc.get("n_light"),
        light_ops=int(doc.get("light_ops", 16)),
        duration_ms=int(doc.get("duration_ms", 500)),
        acquisitions_per_worker=doc.get("acquisitions_per_worker"),
    )


def run_spinlock(spec, values, workload, seed, sink):
    result, _ = spinlock_run(SpinlockConfig(**dict(values)), contention_workload(workload), seed)
    for name, value in result.summary().items():
        sink.record(name, value)
    return {"low_fidelity": result.low_fidelity, "workers": result.workers}


def run_synthetic(spec, values, workload, seed, sink):
    u = encode_unit(spec, TunableAssignment(spec.component_id, dict(values)))
    kwargs = {"target": float(workload["target"])} if "target" in workload else {}
    sink.record("value", synthetic.evaluate(workload.get("function", "quadratic"), u, **kwargs))
    return {}


@dataclass(frozen=True)
class Benchmark:
    name: str
    default_spec: Callable[[], ComponentSpec]
    run: Runner


BENCHMARKS: dict[str, Benchmark] = {
    "hashtable": Benchmark("hashtable", hashtable_spec, run_hashtable),
    "spinlock": Benchmark("spinlock", spinlock_spec, run_spinlock),
    "synthetic": Benchmark("synthetic", synthetic_spec, run_synthetic),
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; known: {sorted(BENCHMARKS)}") from None


__all__ = [
    "BENCHMARKS",
    "Benchmark",
    "get_benchmark",
    "hashtable_spec",
    "spinlock_spec",
    "synthetic_spec",
    "HashTableConfig",
    "HashWorkload",
    "hashtable_run",
    "SpinlockConfig",
    "ContentionWorkload",
    "spinlock_run",
    "workload_family",
]
