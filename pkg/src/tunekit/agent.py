"""The side agent and the component-side hooks it talks to.

Traffic on a :class:`~tunekit.channel.Transport`:

* component -> agent (``up``): REGISTER (search-space JSON), TELEMETRY, ACK
* agent -> component (``down``): ACK, CONFIG_UPDATE

An ACK payload is the u64 sequence number of the acknowledged frame, i.e.
its ring position (the producer's ``head`` when it was pushed).

Execution contexts: the component's service thread is the only consumer of
``down``; every ``up`` producer goes through the component's
:class:`~tunekit.telemetry.TelemetrySink` lock.  On the agent side, ``down``
is produced only by the agent's calling thread, and ``up`` is consumed either
by that thread or, while a workload runs, by one drain thread that is joined
before the calling thread reads again.
"""

from __future__ import annotations

import contextlib
import logging
import math
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .channel import (
    ChannelTimeout,
    ConfigUpdate,
    FrameError,
    MsgType,
    OversizedPayload,
    Telemetry,
    Transport,
    ValueType,
    decode_frame,
    decode_telemetry_frame,
    encode_frame,
    pack_ack,
    push_blocking,
    unpack_ack,
)
from .experiment.store import RunRecord, RunStore, record_objective
from .optimizer import ALL_AT_ONCE, Optimizer, Strategy
from .telemetry import (
    CounterDelta,
    MetricAggregate,
    TelemetryCollector,
    TelemetrySink,
    counter_delta,
    sample_counters,
)
from .tunables import (
    AssignmentError,
    ComponentSpec,
    SpecError,
    TunableAssignment,
    decode_unit,
    encode_unit,
    validate_assignment,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 5.0
ENACT_RETRIES = 100
ENACT_BACKOFF_S = 0.001

AGGREGATES = ("mean", "p50", "p95", "p99", "sum", "count-rate")


class HandshakeError(RuntimeError):
    pass


class EpisodeError(RuntimeError):
    """An iteration failed; ``results`` holds the iterations completed (and persisted) before it."""

    def __init__(self, message: str, results: list):
        super().__init__(message)
        self.results = results


def _poll(predicate: Callable[[], bool], timeout: float, what: str) -> None:
    deadline = time.monotonic() + timeout
    spins = 0
    while not predicate():
        if time.monotonic() >= deadline:
            raise ChannelTimeout(f"timed out waiting for {what}")
        spins += 1
        time.sleep(0 if spins < 50 else 0.0002)


# -- component side -------------------------------------------------------------------


def _wire_value(kind: str, value: Any, categories=()) -> tuple[ValueType, Any]:
    if kind == "integer":
        return ValueType.INT64, int(value)
    if kind == "real":
        return ValueType.REAL64, float(value)
    if kind == "boolean":
        return ValueType.BOOL, bool(value)
    return ValueType.CATEGORY, categories.index(value)


class Component:
    """Hooks inside an instrumented component: registration, live parameters, telemetry.

    ``values`` is a plain dict updated one key at a time, so a reader never
    sees a torn value but may see a mix of old and new parameters while an
    update is in flight.
    """

    def __init__(
        self,
        spec: ComponentSpec,
        transport: Transport,
        runner: Callable | None = None,
        on_update: Callable[["Component", str, Any], None] | None = None,
    ):
        self.spec = spec
        self.transport = transport
        self.runner = runner
        self.on_update = on_update
        self.sink = TelemetrySink(spec, transport.up)
        self.values: dict[str, Any] = dict(spec.defaults().values)
        self.updates_applied = 0
        self.errors: list[str] = []
        self._acked: set[int] = set()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> "Component":
        self._thread = threading.Thread(target=self._serve, name=f"{self.spec.name}-hooks", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def __enter__(self) -> "Component":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def register(self, timeout: float = DEFAULT_TIMEOUT_S) -> int:
        """Send REGISTER and wait for the agent's ACK; returns the frame's sequence number."""
        frame = encode_frame(MsgType.REGISTER, self.spec.to_json().encode())
        seq = self._push(frame)
        if self._thread is None:
            raise RuntimeError("start() the component before register()")
        _poll(lambda: seq in self._acked, timeout, "REGISTER ack")
        return seq

    def run(self, workload: Mapping[str, Any], seed: int = 0) -> dict:
        if self.runner is None:
            raise RuntimeError("component has no workload runner")
        return self.runner(self.spec, dict(self.values), workload, seed, self.sink)

    def _push(self, frame: bytes) -> int:
        for _ in range(ENACT_RETRIES + 1):
            seq = self.sink.push_frame(frame)
            if seq is not None:
                return seq
            time.sleep(ENACT_BACKOFF_S)
        raise ChannelTimeout("upstream ring stayed full")

    def _serve(self) -> None:
        ring = self.transport.down
        idle = 0
        while not self._stop.is_set():
            seq = ring.tail
            frame = ring.pop()
            if frame is None:
                idle += 1
                time.sleep(0 if idle < 50 else 0.0002)
                continue
            idle = 0
            try:
                msg_type, payload = decode_frame(frame)
                if msg_type == MsgType.ACK:
                    self._acked.add(unpack_ack(payload))
                elif msg_type == MsgType.CONFIG_UPDATE:
                    self._apply(ConfigUpdate.unpack(payload))
                    self._push(encode_frame(MsgType.ACK, pack_ack(seq)))
            except (FrameError, KeyError, ValueError) as exc:
                self.errors.append(str(exc))
                log.warning("component %s dropped frame %d: %s", self.spec.name, seq, exc)

    def _apply(self, update: ConfigUpdate) -> None:
        if update.component_id != self.spec.component_id:
            raise ValueError(f"update addressed to component {update.component_id}")
        t = self.spec.by_param_id(update.param_id)
        value = update.value
        if t.kind == "categorical":
            value = t.categories[int(value)]
        elif t.kind == "real":
            value = float(value)
        issue = t.check(value)
        if issue is not None:
            raise ValueError(str(issue))
        self.values[t.name] = value
        self.updates_applied += 1
        if self.on_update is not None:
            self.on_update(self, t.name, value)


# -- agent side -----------------------------------------------------------------------


class Agent:
    def __init__(self, transport: Transport, timeout: float = DEFAULT_TIMEOUT_S):
        self.transport = transport
        self.timeout = timeout
        self.spec: ComponentSpec | None = None
        self.collector: TelemetryCollector | None = None
        self.config_frames_sent = 0
        self.ignored_frames = 0
        self.bad_frames = 0
        self._acked: set[int] = set()

    def handshake(self, timeout: float | None = None) -> ComponentSpec:
        """Wait for REGISTER, validate the declared spec, and ACK it."""
        ring = self.transport.up
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        while True:
            seq = ring.tail
            frame = ring.pop()
            if frame is None:
                if time.monotonic() >= deadline:
                    raise ChannelTimeout("no REGISTER before timeout")
                time.sleep(0.0002)
                continue
            try:
                msg_type, payload = decode_frame(frame)
            except FrameError as exc:
                raise HandshakeError(f"corrupt frame during handshake: {exc}") from exc
            if msg_type != MsgType.REGISTER:
                self.ignored_frames += 1
                continue
            try:
                spec = ComponentSpec.from_json(payload)
            except SpecError as exc:
                raise HandshakeError(f"invalid REGISTER: {exc}") from exc
            push_blocking(self.transport.down, encode_frame(MsgType.ACK, pack_ack(seq)), ENACT_RETRIES, ENACT_BACKOFF_S)
            self.spec = spec
            self.collector = TelemetryCollector(spec)
            return spec

    def receive(self, collector: TelemetryCollector | None = None) -> int:
        """Drain every frame currently in the upstream ring; returns frames consumed."""
        collector = collector or self.collector
        frames = self.transport.up.pop_many()
        for frame in frames:
            t = decode_telemetry_frame(frame)
            if t is not None:
                if collector is not None:
                    collector.add(t)
                continue
            try:
                msg_type, payload = decode_frame(frame)
                if msg_type == MsgType.TELEMETRY and collector is not None:
                    collector.add(Telemetry.unpack(payload))
                elif msg_type == MsgType.ACK:
                    self._acked.add(unpack_ack(payload))
                else:
                    self.ignored_frames += 1
            except FrameError:
                self.bad_frames += 1
        return len(frames)

    def enact(self, assignment: TunableAssignment) -> None:
        """Send one CONFIG_UPDATE per tunable in declaration order, each ACKed before the next."""
        spec = self._require_spec()
        issues = validate_assignment(spec, assignment)
        if issues:
            raise AssignmentError(issues)
        for t in spec.tunables:
            vt, value = _wire_value(t.kind, assignment.values[t.name], t.categories)
            frame = encode_frame(MsgType.CONFIG_UPDATE, ConfigUpdate(spec.component_id, t.param_id, vt, value).pack())
            seq = push_blocking(self.transport.down, frame, ENACT_RETRIES, ENACT_BACKOFF_S)
            self.config_frames_sent += 1

            def acked(seq=seq):
                self.receive()
                return seq in self._acked

            _poll(acked, self.timeout, f"ACK of {t.name} update")

    @contextlib.contextmanager
    def draining(self, collector: TelemetryCollector):
        """Consume upstream telemetry on a background thread for the duration of the block."""
        stop = threading.Event()

        def loop():
            idle = 0
            while not stop.is_set():
                if self.receive(collector):
                    idle = 0
                else:
                    idle += 1
                    time.sleep(0 if idle < 20 else 0.0001)

        thread = threading.Thread(target=loop, name="agent-drain", daemon=True)
        thread.start()
        try:
            yield collector
        finally:
            stop.set()
            thread.join()
            self.receive(collector)

    def _require_spec(self) -> ComponentSpec:
        if self.spec is None:
            raise HandshakeError("handshake not completed")
        return self.spec


# -- episodes -------------------------------------------------------------------------


@dataclass(frozen=True)
class Objective:
    metric: str
    direction: str = "minimize"
    aggregate: str = "mean"

    def __post_init__(self) -> None:
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"direction must be minimize or maximize, not {self.direction!r}")
        if self.aggregate not in AGGREGATES:
            raise ValueError(f"aggregate must be one of {AGGREGATES}")

    def value(self, aggregates: Mapping[str, MetricAggregate], wall_ns: int) -> float:
        agg = aggregates.get(self.metric)
        if agg is None:
            raise RuntimeError(f"no telemetry received for objective metric {self.metric!r}")
        if self.aggregate == "count-rate":
            return agg.count / (wall_ns / 1e9) if wall_ns > 0 else math.inf
        if self.aggregate == "mean":
            return agg.mean
        return float(getattr(agg, self.aggregate))

    def canonical(self, value: float) -> float:
        return -value if self.direction == "maximize" else value


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "rs"
    seed: int = 0
    budget: int = 20
    strategy: str = ALL_AT_ONCE
    slice: int = 10

    def to_doc(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "strategy": self.strategy, "slice": self.slice}


@dataclass
class Episode:
    spec: ComponentSpec
    objective: Objective
    optimizer: OptimizerConfig
    benchmark: str
    workload: dict = field(default_factory=dict)
    store: RunStore | None = None
    episode_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    workload_seed: int | None = None

    def __post_init__(self) -> None:
        self.spec.metric(self.objective.metric)  # KeyError if undeclared
        if self.optimizer.budget < 0:
            raise ValueError("budget must be >= 0")

    @property
    def budget(self) -> int:
        return self.optimizer.budget


@dataclass
class IterationResult:
    iteration: int
    assignment: TunableAssignment
    objective_value: float
    aggregates: dict[str, MetricAggregate]
    counters: CounterDelta
    wall_ns: int
    record: RunRecord
    telemetry_received: int = 0


def make_optimizer(episode: Episode) -> Optimizer:
    cfg = episode.optimizer
    anchor = encode_unit(episode.spec, episode.spec.defaults())
    return Optimizer(cfg.kind, episode.spec.dim, cfg.seed, Strategy(cfg.strategy, cfg.slice, anchor=anchor))


def run_iteration(
    agent: Agent, episode: Episode, driver: Callable, assignment: TunableAssignment, iteration: int
) -> IterationResult:
    spec = episode.spec
    agent.enact(assignment)
    collector = TelemetryCollector(spec)
    seed = episode.optimizer.seed if episode.workload_seed is None else episode.workload_seed
    before = sample_counters(reset_peak=True)
    with agent.draining(collector):
        driver(episode.workload, seed)
    after = sample_counters()
    delta = counter_delta(before, after)
    aggregates = collector.aggregates()
    value = episode.objective.value(aggregates, delta.wall_ns)
    obj = episode.objective
    record = RunRecord(
        episode_id=episode.episode_id,
        iteration=iteration,
        benchmark=episode.benchmark,
        component=spec.name,
        workload=dict(episode.workload),
        assignment=dict(assignment.values),
        objective=record_objective(obj.metric, obj.direction, obj.aggregate, value),
        metrics=[{**a.to_doc(), "unit": spec.metric(name).unit} for name, a in aggregates.items()],
        counters=delta.to_doc(),
        optimizer=episode.optimizer.to_doc(),
    )
    if episode.store is not None:
        episode.store.append(record)
    return IterationResult(iteration, assignment, value, aggregates, delta, delta.wall_ns, record, collector.received)


def run_episode(agent: Agent, episode: Episode, driver: Callable) -> list[IterationResult]:
    """suggest -> enact -> run (counters around it) -> aggregate -> persist -> observe, ``budget`` times.

    ``driver(workload, seed)`` triggers one workload run in the component.
    """
    optimizer = make_optimizer(episode)
    results: list[IterationResult] = []
    for i in range(episode.budget):
        try:
            u = optimizer.suggest()
            assignment = decode_unit(episode.spec, u)
            result = run_iteration(agent, episode, driver, assignment, i)
        except Exception as exc:
            raise EpisodeError(f"iteration {i} failed: {exc}", results) from exc
        results.append(result)
        optimizer.observe(encode_unit(episode.spec, assignment), episode.objective.canonical(result.objective_value))
    return results


def replay_suggestions(episode: Episode, records: list[RunRecord]) -> list[list[float]]:
    """Regenerate the unit-cube suggestions an episode made, from its stored records alone."""
    optimizer = make_optimizer(episode)
    out = []
    for r in sorted(records, key=lambda r: r.iteration):
        out.append(optimizer.suggest().tolist())
        a = TunableAssignment(episode.spec.component_id, dict(r.assignment))
        optimizer.observe(encode_unit(episode.spec, a), r.canonical)
    return out


@contextlib.contextmanager
def local_session(spec: ComponentSpec, runner: Callable | None, transport: Transport | None = None, **component_kw):
    """Component and agent sharing one transport in this process, handshake done."""
    own = transport is None
    transport = transport or Transport.in_process()
    component = Component(spec, transport, runner, **component_kw).start()
    agent = Agent(transport)
    try:
        registered = threading.Thread(target=component.register, daemon=True)
        registered.start()
        agent.handshake()
        registered.join()
        yield agent, component
    finally:
        component.stop()
        if own:
            transport.close()


__all__ = [
    "Agent",
    "Component",
    "Episode",
    "EpisodeError",
    "HandshakeError",
    "IterationResult",
    "Objective",
    "OptimizerConfig",
    "OversizedPayload",
    "local_session",
    "replay_suggestions",
    "run_episode",
    "run_iteration",
]
