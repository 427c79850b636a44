"""``tunekit`` command line.

Exit codes: 0 success, 1 usage or config error, 2 RPI violation, 3 runtime error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import time
from pathlib import Path

from .. import rpi
from ..agent import Agent, Episode, EpisodeError, local_session, run_episode, run_iteration
from ..benchmarks import get_benchmark
from ..channel import ChannelTimeout, Transport
from ..telemetry import TelemetryCollector
from ..tunables import AssignmentError
from . import report as reporting
from .config import ConfigError, ExperimentConfig, load_config
from .store import RunStore, read_runs

log = logging.getLogger("tunekit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RPI = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2, which is reserved for RPI violations
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def _session(cfg: ExperimentConfig):
    spec = cfg.component_spec()
    runner = get_benchmark(cfg.benchmark).run
    transport = None if cfg.transport == "inprocess" else Transport.create(cfg.transport)
    try:
        with local_session(spec, runner, transport) as (agent, component):
            yield spec, agent, component
    finally:
        if transport is not None:
            transport.close()


def _episode(cfg: ExperimentConfig, spec, store) -> Episode:
    kw = {"episode_id": cfg.episode_id} if cfg.episode_id else {}
    return Episode(spec, cfg.objective, cfg.optimizer, cfg.benchmark, cfg.workload, store, **kw)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    with _session(cfg) as (spec, agent, component):
        assignment = cfg.initial_assignment(spec)
        episode = _episode(cfg, spec, None)
        result = run_iteration(agent, episode, component.run, assignment, 0)
    print(result.record.to_json())
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else cfg.out
    if out is None:
        raise UsageError("no output store: set 'out' in the config or pass --out")
    with RunStore(out) as store, _session(cfg) as (spec, agent, component):
        episode = _episode(cfg, spec, store)
        try:
            results = run_episode(agent, episode, component.run)
        except EpisodeError as exc:
            log.error("%s (%d iterations persisted)", exc, len(exc.results))
            return EXIT_RUNTIME
    if results:
        best = min(results, key=lambda r: (cfg.objective.canonical(r.objective_value), r.iteration))
        print(
            f"episode {episode.episode_id}: {len(results)} runs -> {out}; "
            f"best {cfg.objective.metric}={best.objective_value:.6g} at iteration {best.iteration} "
            f"{json.dumps(best.assignment.values, sort_keys=True)}"
        )
    return EXIT_OK


def _load_records(path):
    loaded = read_runs(path)
    for issue in loaded.issues:
        print(f"warning: {path}: {issue}", file=sys.stderr)
    return loaded.records


def cmd_report(args) -> int:
    records = _load_records(args.runs)
    if not records:
        raise UsageError(f"{args.runs}: no runs")
    print(reporting.render(reporting.report(records), args.format))
    return EXIT_OK


def cmd_rpi_learn(args) -> int:
    records = _load_records(args.runs)
    if not records:
        raise UsageError(f"{args.runs}: no runs")
    envelopes = rpi.learn_envelopes(records, args.margin)
    rpi.save_envelopes(args.out, envelopes)
    for e in envelopes:
        print(f"{e.component}/{e.workload}: " + ", ".join(f"{k}={v:.6g}" for k, v in sorted(e.caps.items())))
    return EXIT_OK


def cmd_rpi_check(args) -> int:
    try:
        records = _load_records(args.runs)
        envelopes = rpi.load_envelopes(args.rpi)
    except (OSError, ValueError) as exc:
        print(f"error: unreadable input: {exc}", file=sys.stderr)
        return rpi.EXIT_UNREADABLE
    gate = rpi.rpi_gate(envelopes, records)
    print(gate.report)
    return gate.exit_code


def cmd_agent(args) -> int:
    transport = Transport.create(args.transport, args.capacity)
    try:
        agent = Agent(transport, timeout=args.timeout)
        spec = agent.handshake()
        print(f"registered component {spec.name} (id {spec.component_id}, {spec.dim} tunables)", flush=True)
        collector = TelemetryCollector(spec)
        deadline = None if args.duration is None else time.monotonic() + args.duration
        next_print = time.monotonic() + args.interval
        try:
            while deadline is None or time.monotonic() < deadline:
                if not agent.receive(collector):
                    time.sleep(0.001)
                if time.monotonic() >= next_print:
                    _print_aggregates(collector)
                    next_print += args.interval
        except KeyboardInterrupt:
            pass
        agent.receive(collector)
        _print_aggregates(collector)
    finally:
        transport.close()
    return EXIT_OK


def _print_aggregates(collector: TelemetryCollector) -> None:
    doc = {name: a.to_doc() for name, a in collector.aggregates().items()}
    print(json.dumps({"received": collector.received, "metrics": doc}, sort_keys=True), flush=True)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tunekit", description="Tune instrumented components and gate their resource envelopes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run", help="one run at the config's assignment; prints the run record")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("optimize", help="a full tuning episode, appended to the run store")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="run store (overrides the config's 'out')")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("report", help="best run, convergence trace and comparison")
    s.add_argument("--runs", required=True)
    s.add_argument("--format", choices=sorted(reporting.FORMATS), default="table")
    s.set_defaults(func=cmd_report)

    r = sub.add_parser("rpi", help="resource performance interfaces")
    rsub = r.add_subparsers(dest="rpi_command", required=True, parser_class=_Parser)
    s = rsub.add_parser("learn", help="learn envelopes from runs, one per (component, workload)")
    s.add_argument("--runs", required=True)
    s.add_argument("--margin", type=float, default=0.10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rpi_learn)
    s = rsub.add_parser("check", help="gate runs against envelopes")
    s.add_argument("--runs", required=True)
    s.add_argument("--rpi", required=True)
    s.set_defaults(func=cmd_rpi_check)

    s = sub.add_parser("agent", help="standalone agent: create a transport, await a component, print aggregates")
    s.add_argument("--transport", required=True, help="path of the shared ring file to create")
    s.add_argument("--capacity", type=int, default=4096)
    s.add_argument("--timeout", type=float, default=30.0, help="seconds to wait for the handshake")
    s.add_argument("--duration", type=float, help="seconds to listen after the handshake (default: until ^C)")
    s.add_argument("--interval", type=float, default=1.0)
    s.set_defaults(func=cmd_agent)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, AssignmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChannelTimeout, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
