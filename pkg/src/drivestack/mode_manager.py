"""Driving-mode state machine with ODD gating, health monitoring and emergency braking."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .hdmap import MapModel
from .messages import (
    AUTOMATED_MODES,
    ControlCommand,
    DriveMode,
    DriverInput,
    Heartbeat,
    HmiRequest,
    ModeStatus,
    PlannerStatus,
)
from .msgbus import MessageBus, QosPolicy, UnknownService
from .odd import OddStatus, OddStatusList
from .perception import ConstructionZoneEvent, ObjectList
from .worldsim import VehicleParams, VehicleState

__all__ = [
    "EVENT_KINDS",
    "EVENT_PRIORITY",
    "ModeEvent",
    "ModeContext",
    "HealthRecord",
    "ModeConfig",
    "transition",
    "check_ttc",
    "emergency_command",
    "HealthMonitor",
    "ModeManagerNode",
]

M = DriveMode

EVENT_KINDS = (
    "driver_engage",
    "driver_disengage",
    "driver_ack_takeover",
    "odd_violated",
    "odd_restored",
    "cz_entered",
    "cz_cleared",
    "module_unhealthy",
    "planner_infeasible",
    "ttc_critical",
    "vehicle_stopped",
    "takeover_timeout",
)

# lower value is applied first within a tick
EVENT_PRIORITY = {
    "ttc_critical": 0,
    "module_unhealthy": 1,
    "planner_infeasible": 2,
    "odd_violated": 3,
    "odd_restored": 3,
    "takeover_timeout": 4,
    "cz_entered": 5,
    "cz_cleared": 5,
    "vehicle_stopped": 6,
    "driver_engage": 7,
    "driver_disengage": 7,
    "driver_ack_takeover": 7,
}


@dataclass(frozen=True)
class ModeEvent:
    kind: str
    tick: int = 0
    payload: object = None
    source: int = 0

    def __post_init__(self):
        if self.kind not in EVENT_PRIORITY:
            raise ValueError(f"unknown mode event {self.kind!r}")

    def sort_key(self):
        return (self.tick, EVENT_PRIORITY[self.kind], self.source)


@dataclass(frozen=True)
class ModeContext:
    odd_satisfied: dict = field(default_factory=dict)
    vehicle_stopped: bool = False
    driver_ack_latched: bool = False

    def odd_ok(self, mode: DriveMode) -> bool:
        return bool(self.odd_satisfied.get(mode, False))


def transition(current: DriveMode, event: ModeEvent, ctx: ModeContext) -> DriveMode:
    """Next mode for one event. Pairs not covered by the table keep the mode."""
    k = event.kind
    if k == "ttc_critical" and current in AUTOMATED_MODES:
        return M.EMERGENCY_BRAKE
    if k == "driver_disengage" and current in AUTOMATED_MODES:
        return M.MANUAL

    if current is M.MANUAL:
        if k == "driver_engage" and ctx.odd_ok(M.AUTOPILOT):
            return M.AUTOPILOT
    elif current in (M.AUTOPILOT, M.CZA):
        if k == "odd_violated" and DriveMode(event.payload) is current:
            return M.TAKEOVER_REQUESTED
        if k in ("module_unhealthy", "planner_infeasible"):
            return M.TAKEOVER_REQUESTED
        if current is M.AUTOPILOT and k == "cz_entered":
            return M.CZA if ctx.odd_ok(M.CZA) else M.TAKEOVER_REQUESTED
        if current is M.CZA and k == "cz_cleared" and ctx.odd_ok(M.AUTOPILOT):
            return M.AUTOPILOT
    elif current is M.TAKEOVER_REQUESTED:
        if k == "driver_ack_takeover":
            return M.MANUAL
        if k == "takeover_timeout":
            return M.EMERGENCY_BRAKE
    elif current is M.EMERGENCY_BRAKE:
        if k == "vehicle_stopped" and ctx.driver_ack_latched:
            return M.MANUAL
        if k == "driver_ack_takeover" and ctx.vehicle_stopped:
            return M.MANUAL
    return current


def check_ttc(
    ego_s: float,
    ego_d: float,
    v_ego: float,
    objects,
    lane_width: float,
    reach: float,
    threshold: float = 1.5,
    eps: float = 0.1,
    tick: int = 0,
) -> ModeEvent | None:
    """``ttc_critical`` for the most urgent in-lane object ahead, if below ``threshold``."""
    worst = math.inf
    worst_id = None
    half = 0.5 * lane_width
    for o in objects:
        if o.s <= ego_s or abs(o.d - ego_d) > half:
            continue
        ttc = (o.s - ego_s - reach) / max(v_ego, eps)
        if ttc < worst:
            worst = ttc
            worst_id = o.id
    if worst < threshold:
        return ModeEvent("ttc_critical", tick, {"object": worst_id, "ttc": worst})
    return None


def emergency_command(params: VehicleParams, tick: int = 0) -> ControlCommand:
    """Full braking with the wheel held straight, bypassing planner and controller."""
    return ControlCommand(params.a_min, 0.0, "emergency_override", tick)


@dataclass
class HealthRecord:
    node: str
    last_heartbeat_tick: int = 0
    status: str = "healthy"


class HealthMonitor:
    def __init__(self, nodes, timeout_ticks: int = 10, start_tick: int = 0):
        self.timeout_ticks = timeout_ticks
        self.records = {n: HealthRecord(n, start_tick) for n in nodes}

    def heartbeat(self, node: str, tick: int) -> None:
        rec = self.records.setdefault(node, HealthRecord(node, tick))
        rec.last_heartbeat_tick = max(rec.last_heartbeat_tick, tick)

    def check(self, tick: int) -> list[ModeEvent]:
        """One ``module_unhealthy`` event per transition into the degraded state."""
        events = []
        for i, rec in enumerate(self.records.values()):
            degraded = tick - rec.last_heartbeat_tick > self.timeout_ticks
            if degraded and rec.status == "healthy":
                events.append(ModeEvent("module_unhealthy", tick, rec.node, i))
            rec.status = "degraded" if degraded else "healthy"
        return events


@dataclass(frozen=True)
class ModeConfig:
    takeover_timeout_ticks: int = 200
    heartbeat_timeout_ticks: int = 10
    ttc_threshold: float = 1.5
    stopped_speed: float = 0.05
    monitored_nodes: tuple[str, ...] = ("worldsim", "perception", "odd", "planner", "control", "hmi")


class ModeManagerNode:
    name = "mode_manager"

    def __init__(
        self,
        bus: MessageBus,
        map_: MapModel,
        params: VehicleParams,
        cfg: ModeConfig,
        qos: dict[str, QosPolicy],
    ):
        self.bus = bus
        self.map = map_
        self.params = params
        self.cfg = cfg
        self._odd = bus.subscribe("/odd/status", OddStatusList, qos["/odd/status"])
        self._cz = bus.subscribe("/perception/cz_event", ConstructionZoneEvent, qos["/perception/cz_event"])
        self._objects = bus.subscribe("/perception/objects", ObjectList, qos["/perception/objects"])
        self._driver = bus.subscribe("/hmi/driver", DriverInput, qos["/hmi/driver"])
        self._ego = bus.subscribe("/ego/state", VehicleState, qos["/ego/state"])
        self._plan = bus.subscribe("/plan/status", PlannerStatus, qos["/plan/status"])
        self._hb_subs = [
            bus.subscribe(f"/health/{n}", Heartbeat, qos["/health"]) for n in cfg.monitored_nodes
        ]
        self._mode_pub = bus.advertise("/mode/active", ModeStatus)
        self._cmd_pub = bus.advertise("/control/cmd", ControlCommand)
        self._hmi_pub = bus.advertise("/hmi/requests", HmiRequest)
        self.health = HealthMonitor(cfg.monitored_nodes, cfg.heartbeat_timeout_ticks)
        self.mode = M.MANUAL
        self.odd: dict[DriveMode, OddStatus] = {}
        self.cz_status: str | None = None
        self.ego: VehicleState | None = None
        self.objects = ()
        self.takeover_start: int | None = None
        self.ack_latched = False
        self.history: list[tuple[int, DriveMode, str]] = [(0, M.MANUAL, "init")]

    def _collect_events(self, tick: int) -> list[ModeEvent]:
        events: list[ModeEvent] = []
        for env in self._odd.drain():
            for st in env.payload.statuses:
                self.odd[st.mode] = st
        for env in self._cz.drain():
            self.cz_status = env.payload.status
        objs = self._objects.drain()
        if objs:
            self.objects = objs[-1].payload.objects
        ego = self._ego.drain()
        if ego:
            self.ego = ego[-1].payload
        for sub in self._hb_subs:
            for env in sub.drain():
                self.health.heartbeat(env.payload.node, env.payload.tick)
        events.extend(self.health.check(tick))
        for env in self._plan.drain():
            if not env.payload.ok:
                events.append(ModeEvent("planner_infeasible", tick, env.payload.detail))
        for i, mode in enumerate((M.AUTOPILOT, M.CZA)):
            st = self.odd.get(mode)
            if st is not None:
                kind = "odd_restored" if st.satisfied else "odd_violated"
                events.append(ModeEvent(kind, tick, mode, i))
        if self.cz_status == "entered_detection":
            events.append(ModeEvent("cz_entered", tick))
        elif self.cz_status == "cleared":
            events.append(ModeEvent("cz_cleared", tick))
        if self.ego is not None:
            if self.ego.v < self.cfg.stopped_speed:
                events.append(ModeEvent("vehicle_stopped", tick))
            if self.mode in AUTOMATED_MODES:
                s, d, _ = self.map.reference_line.to_frenet(self.ego.x, self.ego.y)
                ev = check_ttc(
                    float(s[0]), float(d[0]), self.ego.v, self.objects, self.map.lane_width,
                    self.params.front_reach, self.cfg.ttc_threshold, tick=tick,
                )
                if ev is not None:
                    events.append(ev)
        if self.mode is M.TAKEOVER_REQUESTED and self.takeover_start is not None:
            if tick - self.takeover_start >= self.cfg.takeover_timeout_ticks:
                events.append(ModeEvent("takeover_timeout", tick))
        for j, env in enumerate(self._driver.drain()):
            events.append(ModeEvent(env.payload.kind, tick, None, j))
        events.sort(key=ModeEvent.sort_key)
        return events

    def _context(self) -> ModeContext:
        return ModeContext(
            odd_satisfied={m: st.satisfied for m, st in self.odd.items()},
            vehicle_stopped=self.ego is not None and self.ego.v < self.cfg.stopped_speed,
            driver_ack_latched=self.ack_latched,
        )

    def _takeover_attributes(self, event: ModeEvent, previous: DriveMode) -> tuple[str, ...]:
        if event.kind == "odd_violated":
            return self.odd[DriveMode(event.payload)].violated_attributes
        if event.kind == "cz_entered":
            st = self.odd.get(M.CZA)
            return ("cz_entered",) + (st.violated_attributes if st else ())
        if event.kind == "module_unhealthy":
            return (f"module_unhealthy:{event.payload}",)
        return (event.kind,)

    def tick(self, tick: int) -> None:
        events = self._collect_events(tick)
        start = self.mode
        cause = ""
        for ev in events:
            if self.mode is M.EMERGENCY_BRAKE and ev.kind == "driver_ack_takeover":
                self.ack_latched = True
            prev = self.mode
            nxt = transition(prev, ev, self._context())
            if nxt is prev:
                continue
            self.mode = nxt
            cause = ev.kind
            self.history.append((tick, nxt, ev.kind))
            self._on_enter(prev, nxt, ev, tick)

        self._mode_pub.publish(ModeStatus(tick, self.mode, start, self.mode is not start, cause))
        if self.mode is M.EMERGENCY_BRAKE:
            self._cmd_pub.publish(emergency_command(self.params, tick))

    def _on_enter(self, prev: DriveMode, nxt: DriveMode, ev: ModeEvent, tick: int) -> None:
        if nxt is M.TAKEOVER_REQUESTED:
            self.takeover_start = tick
            attrs = self._takeover_attributes(ev, prev)
            self._hmi_pub.publish(HmiRequest("takeover_request", tick, attrs, f"from {prev.value}"))
        elif prev is M.TAKEOVER_REQUESTED:
            self.takeover_start = None
        if nxt is M.EMERGENCY_BRAKE:
            self.ack_latched = False
            self._hmi_pub.publish(HmiRequest("warning", tick, (ev.kind,), "emergency braking"))
        if nxt in (M.AUTOPILOT, M.CZA):
            try:
                self.bus.call_service("plan/replan_now", nxt)
            except UnknownService:
                pass
