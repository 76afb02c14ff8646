"""Closed-loop scenario execution with a JSONL trace recorder."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

from ..control import ControlNode
from ..hmi import HmiNode
from ..messages import to_record
from ..mode_manager import ModeManagerNode
from ..msgbus import MessageBus, QosPolicy
from ..odd import OddNode
from ..perception import PerceptionNode
from ..planner import PlannerNode
from ..worldsim import World, WorldNode
from .spec import ScenarioSpec
from .verdict import Verdict, evaluate

__all__ = ["InternalError", "RunResult", "TraceRecorder", "default_qos", "build_nodes", "run", "NODE_ORDER"]

NODE_ORDER = ("worldsim", "perception", "odd", "mode_manager", "planner", "control", "hmi", "recorder")

# distance from the end of the reference line at which the route counts as done
ROUTE_END_MARGIN = 5.0

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class InternalError(Exception):
    pass


def default_qos(overrides: dict | None = None) -> dict[str, QosPolicy]:
    # With one-tick latency a producer scheduled before its consumer publishes
    # the next sample before the previous one is drained, so state topics keep 2.
    depths = {
        "/world/truth": 2,
        "/ego/state": 2,
        "/perception/objects": 2,
        "/perception/cz_event": 8,
        "/odd/status": 2,
        "/mode/active": 8,
        "/plan/trajectory": 2,
        "/plan/status": 8,
        "/control/cmd": 8,
        "/hmi/requests": 8,
        "/hmi/driver": 8,
        "/health": 16,
    }
    depths.update(overrides or {})
    return {k: QosPolicy(depth=v) for k, v in depths.items()}


class TraceRecorder:
    """Subscribes to every registered topic and writes one JSON line per envelope."""

    name = "recorder"

    def __init__(self, bus: MessageBus, sink, depth: int = 4096):
        self.bus = bus
        self.sink = sink
        self._subs = [
            (i, bus.subscribe(name, msg_type, QosPolicy(depth=depth)))
            for i, (name, msg_type) in enumerate(bus.topics())
        ]
        self.counts = {name: 0 for name, _ in bus.topics()}
        self.records_written = 0

    def tick(self, tick: int) -> None:
        batch = []
        for i, sub in self._subs:
            for env in sub.drain():
                batch.append((env.publish_tick, i, env.publisher, env.sequence, env))
        batch.sort(key=lambda b: b[:4])
        write = self.sink.write
        for *_, env in batch:
            rec = {
                "tick": env.publish_tick,
                "topic": env.topic,
                "pub": env.publisher,
                "seq": env.sequence,
                "payload": to_record(env.payload),
            }
            write(json.dumps(rec, separators=(",", ":"), allow_nan=False))
            write("\n")
            self.counts[env.topic] += 1
        self.records_written += len(batch)

    def reconcile(self) -> None:
        """Every published envelope must have been recorded."""
        for name, n in self.counts.items():
            published = self.bus.publish_count(name)
            if published != n:
                raise InternalError(f"recorder saw {n} of {published} envelopes on {name}")


@dataclass
class RunResult:
    verdict: Verdict
    trace_path: Path | None
    exit_code: int
    ticks: int
    terminated_by: str
    trace_text: str | None = None
    nodes: dict | None = None


def build_nodes(spec: ScenarioSpec, bus: MessageBus, seed: int) -> dict:
    qos = default_qos(spec.qos)
    world = World(spec.map, spec.params, spec.ego, spec.obstacles, spec.environment, spec.dt)
    nodes = {
        "worldsim": WorldNode(bus, world, qos),
        "perception": PerceptionNode(bus, spec.map, spec.sensor, spec.zone, qos, seed=seed),
        "odd": OddNode(bus, spec.map, spec.odd, qos),
        "mode_manager": ModeManagerNode(bus, spec.map, spec.params, spec.mode, qos),
        "planner": PlannerNode(bus, spec.map, spec.params, spec.profiles, qos, spec.replan_ticks),
        "control": ControlNode(bus, spec.params, spec.pid, spec.stanley, qos, spec.dt, spec.tracking),
        "hmi": HmiNode(bus, spec.driver, qos),
    }
    return nodes


def run(
    spec: ScenarioSpec,
    trace_out=None,
    seed: int | None = None,
    duration_override: float | None = None,
    keep_trace: bool = False,
) -> RunResult:
    """Run ``spec`` to completion and evaluate its pass criteria on the trace.

    Node failures propagate as :class:`InternalError`.
    """
    if duration_override is not None:
        if not duration_override > 0:
            raise ValueError("duration override must be positive")
        spec = replace(spec, duration_s=float(duration_override))
    seed = spec.seed if seed is None else seed

    buf = io.StringIO()
    bus = MessageBus()
    try:
        nodes = build_nodes(spec, bus, seed)
        recorder = TraceRecorder(bus, buf)
        slots = [nodes[n] for n in NODE_ORDER[:-1]] + [recorder]
        world_node = nodes["worldsim"]
        end_s = spec.map.length - ROUTE_END_MARGIN
        reason = "duration"
        tick = 0
        for tick in range(spec.n_ticks + 1):
            bus.tick = tick
            for node in slots:
                node.tick(tick)
            m = world_node.latest_metrics
            if m.collision:
                reason = "collision"
                break
            if m.s >= end_s:
                reason = "route_end"
                break
        # flush what the last tick published
        bus.tick = tick + 1
        recorder.tick(tick + 1)
        recorder.reconcile()
        bus.close()
    except InternalError:
        raise
    except Exception as exc:  # any node failure is an internal error of the run
        raise InternalError(f"{type(exc).__name__}: {exc}") from exc

    text = buf.getvalue()
    path = None
    if trace_out is not None:
        path = Path(trace_out)
        path.write_text(text, encoding="utf-8")
    records = [json.loads(line) for line in text.splitlines()]
    verdict = evaluate(records, spec.criteria)
    return RunResult(
        verdict=verdict,
        trace_path=path,
        exit_code=EXIT_PASS if verdict.passed else EXIT_FAIL,
        ticks=tick + 1,
        terminated_by=reason,
        trace_text=text if keep_trace else None,
        nodes=nodes,
    )
