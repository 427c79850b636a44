"""Append-only run store: one JSON object per line.

A crash can leave a partial final line.  Loading skips it with a warning,
and the next writer terminates it with a newline before appending, so no
existing byte is ever rewritten.
"""

from __future__ import annotations

import json
import logging
import math
import os
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class RecordError(ValueError):
    pass


def new_run_id() -> str:
    return uuid.uuid4().hex


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class RunRecord:
    episode_id: str
    iteration: int
    benchmark: str
    component: str
    workload: dict
    assignment: dict
    objective: dict  # metric, direction, aggregate, value, canonical
    metrics: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    workload_name: str = ""
    run_id: str = field(default_factory=new_run_id)
    timestamp_utc: str = field(default_factory=utc_now)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if not self.workload_name:
            self.workload_name = str(self.workload.get("name") or self.benchmark)
        if "canonical" not in self.objective and "value" in self.objective:
            value = self.objective["value"]
            self.objective["canonical"] = -value if self.objective.get("direction") == "maximize" else value

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise RecordError(f"unsupported schema_version {self.schema_version}")
        if self.iteration < 0:
            raise RecordError("iteration must be >= 0")
        if len(self.run_id) != 32 or any(c not in "0123456789abcdef" for c in self.run_id):
            raise RecordError("run_id must be 32 lowercase hex digits")
        value = self.objective.get("value")
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise RecordError("objective.value must be finite")

    @property
    def canonical(self) -> float:
        return float(self.objective["canonical"])

    def metric(self, name: str) -> dict | None:
        for m in self.metrics:
            if m.get("name") == name:
                return m
        return None

    def to_doc(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"), sort_keys=True, allow_nan=False)

    @classmethod
    def from_doc(cls, doc: dict) -> "RunRecord":
        if not isinstance(doc, dict):
            raise RecordError("record must be an object")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise RecordError(f"unsupported schema_version {version!r}")
        try:
            record = cls(**doc)
        except TypeError as exc:
            raise RecordError(str(exc)) from exc
        record.validate()
        return record


class RunStore:
    """Single-writer handle on a run file."""

    def __init__(self, path):
        self.path = Path(path)
        self._file = None

    def _open(self):
        if self._file is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            needs_newline = False
            if self.path.exists() and self.path.stat().st_size > 0:
                with open(self.path, "rb") as f:
                    f.seek(-1, os.SEEK_END)
                    needs_newline = f.read(1) != b"\n"
            self._file = open(self.path, "a", encoding="utf-8")
            if needs_newline:
                self._file.write("\n")
        return self._file

    def append(self, record: RunRecord) -> None:
        record.validate()
        f = self._open()
        f.write(record.to_json() + "\n")
        f.flush()

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self) -> "RunStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def append_run(store: RunStore | str | os.PathLike, record: RunRecord) -> None:
    if isinstance(store, RunStore):
        store.append(record)
    else:
        with RunStore(store) as s:
            s.append(record)


@dataclass
class LoadResult:
    records: list[RunRecord]
    issues: list[str]


def read_runs(path) -> LoadResult:
    """Every complete, valid record in append order plus one issue string per skipped line."""
    records, issues = [], []
    with open(path, "rb") as f:
        data = f.read()
    lines = data.split(b"\n")
    trailing = lines.pop()  # bytes after the last newline: empty, or a partial write
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            records.append(RunRecord.from_doc(json.loads(raw)))
        except (json.JSONDecodeError, UnicodeDecodeError, RecordError) as exc:
            issues.append(f"line {lineno}: {exc}")
    if trailing.strip():
        issues.append(f"line {len(lines) + 1}: truncated final line ignored")
    for issue in issues:
        log.warning("%s: %s", path, issue)
    return LoadResult(records, issues)


def load_runs(path, episode: str | None = None, benchmark: str | None = None) -> list[RunRecord]:
    records = read_runs(path).records
    if episode is not None:
        records = [r for r in records if r.episode_id == episode]
    if benchmark is not None:
        records = [r for r in records if r.benchmark == benchmark]
    return records


def canonical_value(direction: str, value: float) -> float:
    return -value if direction == "maximize" else value


def record_objective(metric: str, direction: str, aggregate: str, value: float) -> dict[str, Any]:
    return {
        "metric": metric,
        "direction": direction,
        "aggregate": aggregate,
        "value": value,
        "canonical": canonical_value(direction, value),
    }
