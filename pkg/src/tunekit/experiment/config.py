"""Experiment configuration files.

A config is a JSON object::

    {
      "benchmark": "hashtable",
      "space": "hashtable_space.json",          # optional, else the benchmark's own
      "workload": {"name": "zipf50k", "n_keys": 50000, "key_dist": "zipf"},
      "objective": {"metric": "probe_len", "direction": "minimize", "aggregate": "mean"},
      "optimizer": {"kind": "bo", "seed": 1, "budget": 50, "strategy": "all_at_once"},
      "assignment": {"bucket_count_log2": 4},   # optional, used by `run`
      "transport": "inprocess",                 # or a path for a file-backed ring pair
      "out": "runs.jsonl"
    }

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..agent import Objective, OptimizerConfig
from ..benchmarks import get_benchmark, synthetic_spec
from ..optimizer import ALL_AT_ONCE, ONE_AT_A_TIME
from ..tunables import AssignmentError, ComponentSpec, SpecError, TunableAssignment, validate_assignment

OPTIMIZER_KINDS = ("rs", "bo")
STRATEGIES = (ALL_AT_ONCE, ONE_AT_A_TIME)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    benchmark: str
    objective: Objective
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    workload: dict = field(default_factory=dict)
    space: Path | None = None
    assignment: dict = field(default_factory=dict)
    transport: str = "inprocess"
    out: Path | None = None
    episode_id: str | None = None

    def component_spec(self) -> ComponentSpec:
        if self.space is not None:
            return ComponentSpec.load(self.space)
        if self.benchmark == "synthetic":
            return synthetic_spec(int(self.workload.get("dim", 2)))
        return get_benchmark(self.benchmark).default_spec()

    def initial_assignment(self, spec: ComponentSpec) -> TunableAssignment:
        values = dict(spec.defaults().values)
        values.update(self.assignment)
        assignment = TunableAssignment(spec.component_id, values)
        issues = validate_assignment(spec, assignment)
        if issues:
            raise AssignmentError(issues)
        return assignment

    @classmethod
    def from_doc(cls, doc: dict[str, Any], base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - {"benchmark", "objective", "optimizer", "workload", "space", "assignment", "transport", "out", "episode_id"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        base = base or Path(".")

        def path(key):
            return None if doc.get(key) is None else base / doc[key]

        try:
            bench = doc["benchmark"]
            get_benchmark(bench)
            objective = Objective(**doc["objective"])
            opt = OptimizerConfig(**doc.get("optimizer", {}))
        except KeyError as exc:
            raise ConfigError(f"missing or unknown key: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if opt.kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"optimizer.kind must be one of {OPTIMIZER_KINDS}")
        if opt.strategy not in STRATEGIES:
            raise ConfigError(f"optimizer.strategy must be one of {STRATEGIES}")
        if opt.budget < 0 or opt.slice < 1:
            raise ConfigError("optimizer.budget must be >= 0 and optimizer.slice >= 1")
        transport = doc.get("transport", "inprocess")
        cfg = cls(
            benchmark=bench,
            objective=objective,
            optimizer=opt,
            workload=dict(doc.get("workload", {})),
            space=path("space"),
            assignment=dict(doc.get("assignment", {})),
            transport=transport if transport == "inprocess" else str(base / transport),
            out=path("out"),
            episode_id=doc.get("episode_id"),
        )
        try:
            spec = cfg.component_spec()
            spec.metric(objective.metric)
        except (SpecError, OSError) as exc:
            raise ConfigError(f"search space: {exc}") from exc
        except KeyError as exc:
            raise ConfigError(f"objective metric not declared by the component: {exc}") from exc
        return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_doc(doc, base=path.parent)
