"""Best run, convergence trace and optimizer comparison over stored runs.

Traces are prefix minima of the canonical (minimization) objective.  Every
rendered value is flipped back to the user's direction.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from typing import Sequence

from .store import RunRecord


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeSummary:
    episode_id: str
    benchmark: str
    kind: str
    strategy: str
    direction: str
    metric: str
    best: RunRecord
    iterations: tuple[int, ...]
    objective: tuple[float, ...]  # user orientation
    trace: tuple[float, ...]  # canonical prefix minimum

    def user(self, canonical: float) -> float:
        return -canonical if self.direction == "maximize" else canonical

    @property
    def best_value(self) -> float:
        return self.best.objective["value"]

    @property
    def trace_user(self) -> list[float]:
        return [self.user(v) for v in self.trace]


@dataclass(frozen=True)
class ComparisonRow:
    benchmark: str
    kind: str
    strategy: str
    episodes: int
    direction: str
    median_best: float
    best: float
    worst: float


@dataclass(frozen=True)
class Report:
    episodes: tuple[EpisodeSummary, ...]
    comparison: tuple[ComparisonRow, ...]


def prefix_min(values: Sequence[float]) -> list[float]:
    out, acc = [], float("inf")
    for v in values:
        acc = min(acc, v)
        out.append(acc)
    return out


def best_run(runs: Sequence[RunRecord]) -> RunRecord:
    if not runs:
        raise ReportError("no runs")
    return min(runs, key=lambda r: (r.canonical, r.iteration))


def summarize_episode(runs: Sequence[RunRecord]) -> EpisodeSummary:
    runs = sorted(runs, key=lambda r: r.iteration)
    first = runs[0]
    return EpisodeSummary(
        episode_id=first.episode_id,
        benchmark=first.benchmark,
        kind=str(first.optimizer.get("kind", "?")),
        strategy=str(first.optimizer.get("strategy", "?")),
        direction=first.objective.get("direction", "minimize"),
        metric=first.objective.get("metric", ""),
        best=best_run(runs),
        iterations=tuple(r.iteration for r in runs),
        objective=tuple(r.objective["value"] for r in runs),
        trace=tuple(prefix_min([r.canonical for r in runs])),
    )


def report(runs: Sequence[RunRecord]) -> Report:
    if not runs:
        raise ReportError("cannot report on zero runs")
    by_episode: dict[str, list[RunRecord]] = {}
    for r in runs:
        by_episode.setdefault(r.episode_id, []).append(r)
    episodes = tuple(summarize_episode(g) for g in by_episode.values())

    groups: dict[tuple[str, str, str], list[EpisodeSummary]] = {}
    for e in episodes:
        groups.setdefault((e.benchmark, e.kind, e.strategy), []).append(e)
    rows = []
    for (bench, kind, strategy), eps in sorted(groups.items()):
        canon = sorted(e.best.canonical for e in eps)
        direction = eps[0].direction
        flip = (lambda v: -v) if direction == "maximize" else (lambda v: v)
        rows.append(
            ComparisonRow(
                benchmark=bench,
                kind=kind,
                strategy=strategy,
                episodes=len(eps),
                direction=direction,
                median_best=flip(statistics.median(canon)),
                best=flip(canon[0]),
                worst=flip(canon[-1]),
            )
        )
    return Report(episodes, tuple(rows))


def to_json(rep: Report) -> str:
    doc = {
        "episodes": [
            {
                "episode_id": e.episode_id,
                "benchmark": e.benchmark,
                "optimizer": {"kind": e.kind, "strategy": e.strategy},
                "objective": {"metric": e.metric, "direction": e.direction},
                "best": {
                    "run_id": e.best.run_id,
                    "iteration": e.best.iteration,
                    "value": e.best_value,
                    "assignment": e.best.assignment,
                },
                "trace": e.trace_user,
            }
            for e in rep.episodes
        ],
        "comparison": [vars(row) for row in rep.comparison],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def to_csv(rep: Report) -> str:
    """Long format, one row per (episode, iteration): plot best_so_far against iteration."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["episode_id", "benchmark", "kind", "strategy", "iteration", "objective", "best_so_far"])
    for e in rep.episodes:
        for it, value, best in zip(e.iterations, e.objective, e.trace_user):
            w.writerow([e.episode_id, e.benchmark, e.kind, e.strategy, it, repr(value), repr(best)])
    return buf.getvalue()


def to_table(rep: Report) -> str:
    lines = ["episodes"]
    header = f"  {'episode':<12} {'benchmark':<10} {'kind':<4} {'strategy':<14} {'runs':>5} {'best@':>5} {'best':>14}"
    lines.append(header)
    for e in rep.episodes:
        lines.append(
            f"  {e.episode_id[:12]:<12} {e.benchmark:<10} {e.kind:<4} {e.strategy:<14}"
            f" {len(e.iterations):>5} {e.best.iteration:>5} {e.best_value:>14.6g}"
        )
    lines.append("comparison")
    lines.append(f"  {'benchmark':<10} {'kind':<4} {'strategy':<14} {'eps':>4} {'median':>14} {'best':>14} {'worst':>14}")
    for row in rep.comparison:
        lines.append(
            f"  {row.benchmark:<10} {row.kind:<4} {row.strategy:<14} {row.episodes:>4}"
            f" {row.median_best:>14.6g} {row.best:>14.6g} {row.worst:>14.6g}"
        )
    return "\n".join(lines)


FORMATS = {"table": to_table, "json": to_json, "csv": to_csv}


def render(rep: Report, fmt: str = "table") -> str:
    try:
        return FORMATS[fmt](rep)
    except KeyError:
        raise ReportError(f"unknown format {fmt!r}") from None
