"""Operational design domain checks gating the automated modes."""
from __future__ import annotations

from dataclasses import dataclass

from .hdmap import MapModel
from .messages import DriveMode, Heartbeat
from .msgbus import MessageBus, QosPolicy
from .perception import ConstructionZoneEvent
from .worldsim import Environment, VehicleState, WorldTruth

__all__ = ["ATTRIBUTES", "OddDefinition", "OddStatus", "OddStatusList", "evaluate", "publish_status", "OddNode"]

ATTRIBUTES = ("road_type", "weather", "visibility", "speed", "construction_zone")


@dataclass(frozen=True)
class OddDefinition:
    mode: DriveMode
    allowed_road_types: frozenset = frozenset({"highway"})
    allowed_weather: frozenset = frozenset({"clear", "rain_light"})
    min_visibility: float = 50.0
    speed_range: tuple[float, float] = (0.0, 33.0)
    construction_zone_permitted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", DriveMode(self.mode))
        object.__setattr__(self, "allowed_road_types", frozenset(self.allowed_road_types))
        object.__setattr__(self, "allowed_weather", frozenset(self.allowed_weather))
        object.__setattr__(self, "speed_range", tuple(self.speed_range))
        if not self.allowed_road_types or not self.allowed_weather:
            raise ValueError("allowed sets must be non-empty")
        if self.speed_range[0] > self.speed_range[1]:
            raise ValueError("speed_range needs v_min <= v_max")


@dataclass(frozen=True)
class OddStatus:
    mode: DriveMode
    satisfied: bool
    violated_attributes: tuple[str, ...]
    tick: int = 0


@dataclass(frozen=True)
class OddStatusList:
    tick: int
    statuses: tuple[OddStatus, ...]


def evaluate(
    definition: OddDefinition,
    env: Environment,
    map_: MapModel,
    state: VehicleState,
    cz_active: bool,
    tick: int = 0,
) -> OddStatus:
    """Check every attribute independently and list all that fail."""
    failed = []
    if map_.road_type not in definition.allowed_road_types:
        failed.append("road_type")
    if env.weather not in definition.allowed_weather:
        failed.append("weather")
    if env.visibility < definition.min_visibility:
        failed.append("visibility")
    v_min, v_max = definition.speed_range
    if not v_min <= state.v <= v_max:
        failed.append("speed")
    if cz_active and not definition.construction_zone_permitted:
        failed.append("construction_zone")
    return OddStatus(definition.mode, not failed, tuple(failed), tick)


def publish_status(definitions, env, map_, state, cz_active, tick=0) -> list[OddStatus]:
    return [evaluate(d, env, map_, state, cz_active, tick) for d in definitions]


class OddNode:
    name = "odd"

    def __init__(self, bus: MessageBus, map_: MapModel, definitions, qos: dict[str, QosPolicy]):
        self.map = map_
        self.definitions = tuple(definitions)
        self._truth = bus.subscribe("/world/truth", WorldTruth, qos["/world/truth"])
        self._ego = bus.subscribe("/ego/state", VehicleState, qos["/ego/state"])
        self._cz = bus.subscribe("/perception/cz_event", ConstructionZoneEvent, qos["/perception/cz_event"])
        self._status = bus.advertise("/odd/status", OddStatusList)
        self._hb = bus.advertise("/health/odd", Heartbeat)
        self._env: Environment | None = None
        self._state: VehicleState | None = None
        self.cz_active = False

    def tick(self, tick: int) -> None:
        truth = self._truth.drain()
        if truth:
            self._env = truth[-1].payload.environment
        ego = self._ego.drain()
        if ego:
            self._state = ego[-1].payload
        for env in self._cz.drain():
            self.cz_active = env.payload.status == "entered_detection"
        if self._env is not None and self._state is not None:
            statuses = publish_status(self.definitions, self._env, self.map, self._state, self.cz_active, tick)
            self._status.publish(OddStatusList(tick, tuple(statuses)))
        self._hb.publish(Heartbeat(self.name, tick))
