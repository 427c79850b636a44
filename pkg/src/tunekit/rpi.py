"""Resource Performance Interfaces: per-(component, workload) envelopes and the regression gate.

Measured quantities are read from a run record as follows:

* ``cpu_ns``, ``max_rss_bytes``: the record's counter deltas
* ``latency_p99_ns``: the largest p99 among the record's metrics whose unit is ``ns``
* ``throughput_ops_s``: the mean of the metric named ``throughput_ops_s``

A cap whose quantity was not measured is a violation, not a skip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .experiment.store import RunRecord

MAX_CAPS = {
    "cpu_ns_max": "cpu_ns",
    "max_rss_bytes_max": "max_rss_bytes",
    "latency_p99_ns_max": "latency_p99_ns",
}
MIN_CAPS = {"throughput_ops_s_min": "throughput_ops_s"}
CAP_FIELDS = (*MAX_CAPS, *MIN_CAPS)

EXIT_PASS = 0
EXIT_VIOLATION = 2
EXIT_UNREADABLE = 3


class RpiError(ValueError):
    pass


@dataclass(frozen=True)
class RpiEnvelope:
    component: str
    workload: str
    caps: dict
    source: str = "declared"

    def __post_init__(self) -> None:
        caps = {k: v for k, v in self.caps.items() if v is not None}
        unknown = set(caps) - set(CAP_FIELDS)
        if unknown:
            raise RpiError(f"unknown caps {sorted(unknown)}")
        if not caps:
            raise RpiError("an envelope needs at least one cap")
        for name, value in caps.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0 or not math.isfinite(value):
                raise RpiError(f"cap {name} must be a positive finite number")
        if self.source not in ("declared", "learned"):
            raise RpiError("source must be 'declared' or 'learned'")
        object.__setattr__(self, "caps", caps)

    def to_doc(self) -> dict:
        return {"component": self.component, "workload": self.workload, "caps": dict(self.caps), "source": self.source}

    @classmethod
    def from_doc(cls, doc: dict) -> "RpiEnvelope":
        try:
            return cls(doc["component"], doc["workload"], dict(doc["caps"]), doc.get("source", "declared"))
        except (KeyError, TypeError) as exc:
            raise RpiError(f"malformed RPI document: {exc}") from exc


@dataclass(frozen=True)
class Violation:
    cap: str
    limit: float
    measured: float | None  # None: capped but unmeasured

    def __str__(self) -> str:
        shown = "unmeasured" if self.measured is None else f"{self.measured:g}"
        return f"{self.cap}: limit {self.limit:g}, measured {shown}"


@dataclass
class RpiVerdict:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def measured(run: RunRecord) -> dict[str, float]:
    out = {}
    for key in ("cpu_ns", "max_rss_bytes"):
        if run.counters.get(key) is not None:
            out[key] = float(run.counters[key])
    latency = [m["p99"] for m in run.metrics if _unit(run, m) == "ns"]
    if latency:
        out["latency_p99_ns"] = float(max(latency))
    throughput = run.metric("throughput_ops_s")
    if throughput is not None and throughput.get("count"):
        out["throughput_ops_s"] = throughput["sum"] / throughput["count"]
    return out


def _unit(run: RunRecord, metric: dict) -> str:
    if "unit" in metric:
        return metric["unit"]
    name = metric.get("name", "")
    return "ns" if name.endswith("_ns") else ""


def check_rpi(envelope: RpiEnvelope, run: RunRecord) -> RpiVerdict:
    if (run.component, run.workload_name) != (envelope.component, envelope.workload):
        raise RpiError(
            f"run is for ({run.component}, {run.workload_name}), envelope for ({envelope.component}, {envelope.workload})"
        )
    values = measured(run)
    verdict = RpiVerdict()
    for cap, limit in envelope.caps.items():
        if cap in MAX_CAPS:
            got = values.get(MAX_CAPS[cap])
            ok = got is not None and got <= limit
        else:
            got = values.get(MIN_CAPS[cap])
            ok = got is not None and got >= limit
        if not ok:
            verdict.violations.append(Violation(cap, limit, got))
    return verdict


def learn_envelope(runs: Sequence[RunRecord], margin: float = 0.10) -> RpiEnvelope:
    """Caps at the observed extreme widened by ``margin``; only quantities measured in every run are capped."""
    if not runs:
        raise RpiError("cannot learn an envelope from zero runs")
    if margin < 0:
        raise RpiError("margin must be >= 0")
    keys = {(r.component, r.workload_name) for r in runs}
    if len(keys) != 1:
        raise RpiError(f"runs span several (component, workload) pairs: {sorted(keys)}")
    component, workload = keys.pop()
    per_run = [measured(r) for r in runs]
    caps = {}
    for cap, quantity in MAX_CAPS.items():
        if all(quantity in m for m in per_run):
            limit = max(m[quantity] for m in per_run) * (1 + margin)
            if limit > 0:
                caps[cap] = limit
    for cap, quantity in MIN_CAPS.items():
        if all(quantity in m for m in per_run):
            limit = min(m[quantity] for m in per_run) * (1 - margin)
            if limit > 0:
                caps[cap] = limit
    return RpiEnvelope(component, workload, caps, source="learned")


def learn_envelopes(runs: Iterable[RunRecord], margin: float = 0.10) -> list[RpiEnvelope]:
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in runs:
        groups.setdefault((r.component, r.workload_name), []).append(r)
    return [learn_envelope(g, margin) for _, g in sorted(groups.items())]


def load_envelopes(path) -> list[RpiEnvelope]:
    """An RPI file holds one envelope object or a list of them."""
    doc = json.loads(Path(path).read_text())
    docs = doc if isinstance(doc, list) else [doc]
    return [RpiEnvelope.from_doc(d) for d in docs]


def save_envelopes(path, envelopes: Sequence[RpiEnvelope]) -> None:
    docs = [e.to_doc() for e in envelopes]
    Path(path).write_text(json.dumps(docs[0] if len(docs) == 1 else docs, indent=2) + "\n")


@dataclass
class GateResult:
    exit_code: int
    lines: list[str]
    failures: list[tuple[str, str]]  # (run_id, cap)
    warnings: int
    checked: int

    @property
    def report(self) -> str:
        summary = {
            "verdict": "pass" if self.exit_code == EXIT_PASS else "fail",
            "checked": self.checked,
            "failures": [{"run_id": r, "cap": c} for r, c in self.failures],
            "warnings": self.warnings,
        }
        return "\n".join([*self.lines, json.dumps(summary, sort_keys=True)])


def rpi_gate(envelopes: Sequence[RpiEnvelope], runs: Sequence[RunRecord]) -> GateResult:
    index: dict[tuple[str, str], list[RpiEnvelope]] = {}
    for e in envelopes:
        index.setdefault((e.component, e.workload), []).append(e)
    lines, failures = [], []
    warnings = checked = 0
    for run in runs:
        matched = index.get((run.component, run.workload_name))
        if not matched:
            warnings += 1
            lines.append(f"WARN {run.run_id} no envelope for ({run.component}, {run.workload_name})")
            continue
        for envelope in matched:
            checked += 1
            verdict = check_rpi(envelope, run)
            if verdict.passed:
                lines.append(f"PASS {run.run_id} {envelope.component}/{envelope.workload}")
            else:
                for v in verdict.violations:
                    failures.append((run.run_id, v.cap))
                detail = "; ".join(str(v) for v in verdict.violations)
                lines.append(f"FAIL {run.run_id} {envelope.component}/{envelope.workload} {detail}")
    return GateResult(EXIT_VIOLATION if failures else EXIT_PASS, lines, failures, warnings, checked)
