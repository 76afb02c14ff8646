"""Ground-truth sensor model and construction-zone classifier."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .hdmap import MapModel
from .messages import Heartbeat
from .msgbus import MessageBus, QosPolicy
from .worldsim import Environment, WorldTruth, wrap_angle

__all__ = [
    "DEFAULT_VISIBILITY_FACTORS",
    "SensorConfig",
    "ZoneConfig",
    "DetectedObject",
    "ObjectList",
    "ConstructionZoneEvent",
    "sense",
    "ConstructionZoneClassifier",
    "PerceptionNode",
]

DEFAULT_VISIBILITY_FACTORS = {"clear": 1.0, "rain_light": 0.7, "rain_heavy": 0.4}


@dataclass(frozen=True)
class SensorConfig:
    range_clear: float = 80.0
    fov: float = math.radians(120.0)
    latency_ticks: int = 0
    visibility_factor: dict = field(default_factory=lambda: dict(DEFAULT_VISIBILITY_FACTORS))
    noise_std: float = 0.0

    def __post_init__(self):
        if self.range_clear <= 0:
            raise ValueError("range_clear must be positive")
        if not 0 < self.fov <= 2 * math.pi:
            raise ValueError("fov must be in (0, 2*pi]")
        if self.latency_ticks < 0:
            raise ValueError("latency_ticks must be non-negative")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        for level, f in self.visibility_factor.items():
            if not 0 < f <= 1:
                raise ValueError(f"visibility factor for {level!r} must be in (0, 1]")

    def effective_range(self, env: Environment) -> float:
        return self.range_clear * self.visibility_factor.get(env.weather, 1.0)


@dataclass(frozen=True)
class ZoneConfig:
    min_cones: int = 3
    lookahead: float = 150.0
    margin: float = 10.0
    debounce_ticks: int = 5


@dataclass(frozen=True)
class DetectedObject:
    id: str
    kind: str
    x: float
    y: float
    radius: float
    s: float
    d: float
    first_seen_tick: int
    vx: float = 0.0
    vy: float = 0.0


@dataclass(frozen=True)
class ObjectList:
    tick: int
    source_tick: int
    objects: tuple[DetectedObject, ...]


@dataclass(frozen=True)
class ConstructionZoneEvent:
    status: str  # entered_detection | cleared
    s_start: float
    s_end: float
    cone_count: int
    tick: int = 0


def sense(
    truth: WorldTruth,
    config: SensorConfig,
    env: Environment,
    map_: MapModel,
    tick: int | None = None,
    first_seen: dict | None = None,
    rng: np.random.Generator | None = None,
) -> list[DetectedObject]:
    """Objects inside the effective range and field of view, in truth order.

    ``first_seen`` maps object id to the tick it was first detected and is
    updated in place. Position noise is applied only when ``config.noise_std``
    is positive, drawing from ``rng``.
    """
    ego = truth.ego
    tick = truth.tick if tick is None else tick
    rng_ = config.effective_range(env)
    half_fov = 0.5 * config.fov
    kept = []
    for ob in truth.obstacles:
        dx = ob.x - ego.x
        dy = ob.y - ego.y
        if math.hypot(dx, dy) > rng_:
            continue
        if config.fov < 2 * math.pi and abs(wrap_angle(math.atan2(dy, dx) - ego.psi)) > half_fov:
            continue
        kept.append(ob)
    if not kept:
        return []
    xs = np.array([o.x for o in kept])
    ys = np.array([o.y for o in kept])
    if config.noise_std > 0:
        if rng is None:
            raise ValueError("noise enabled but no random generator given")
        xs = xs + rng.normal(0.0, config.noise_std, xs.shape)
        ys = ys + rng.normal(0.0, config.noise_std, ys.shape)
    s, d, _ = map_.reference_line.to_frenet(xs, ys)
    out = []
    for i, ob in enumerate(kept):
        if first_seen is not None:
            seen = first_seen.setdefault(ob.id, tick)
        else:
            seen = tick
        out.append(
            DetectedObject(
                ob.id, ob.kind, float(xs[i]), float(ys[i]), ob.radius,
                float(s[i]), float(d[i]), seen, ob.vx, ob.vy,
            )
        )
    return out


class ConstructionZoneClassifier:
    """Cone-count zone detector with debounce on both status changes."""

    def __init__(self, cfg: ZoneConfig | None = None):
        self.cfg = cfg or ZoneConfig()
        self.active = False
        self.s_start = 0.0
        self.s_end = 0.0
        self.cone_count = 0
        self._streak = 0

    def _cones_ahead(self, objects, ego_s):
        la = self.cfg.lookahead
        return [o for o in objects if o.kind == "cone" and ego_s < o.s <= ego_s + la]

    def step(self, objects, ego_s: float, tick: int = 0) -> ConstructionZoneEvent | None:
        """Feed one tick of detections; returns an event on status or extent change."""
        ahead = self._cones_ahead(objects, ego_s)
        margin = self.cfg.margin
        if not self.active:
            if len(ahead) >= self.cfg.min_cones:
                self._streak += 1
            else:
                self._streak = 0
            if self._streak < self.cfg.debounce_ticks:
                return None
            self._streak = 0
            self.active = True
            self.s_start = min(o.s for o in ahead) - margin
            self.s_end = max(o.s for o in ahead) + margin
            self.cone_count = len(ahead)
            return ConstructionZoneEvent("entered_detection", self.s_start, self.s_end, self.cone_count, tick)

        changed = False
        cones = [o for o in objects if o.kind == "cone" and o.s <= ego_s + self.cfg.lookahead]
        for o in cones:
            if o.s - margin < self.s_start:
                self.s_start = o.s - margin
                changed = True
            if o.s + margin > self.s_end:
                self.s_end = o.s + margin
                changed = True
        if len(ahead) > self.cone_count:
            self.cone_count = len(ahead)
            changed = True

        if ego_s > self.s_end and not ahead:
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self.cfg.debounce_ticks:
            self._streak = 0
            self.active = False
            return ConstructionZoneEvent("cleared", self.s_start, self.s_end, self.cone_count, tick)
        if changed:
            return ConstructionZoneEvent("entered_detection", self.s_start, self.s_end, self.cone_count, tick)
        return None


class PerceptionNode:
    name = "perception"

    def __init__(
        self,
        bus: MessageBus,
        map_: MapModel,
        sensor: SensorConfig,
        zone: ZoneConfig,
        qos: dict[str, QosPolicy],
        seed: int = 0,
    ):
        self.map = map_
        self.sensor = sensor
        self.classifier = ConstructionZoneClassifier(zone)
        self._truth = bus.subscribe("/world/truth", WorldTruth, qos["/world/truth"])
        self._objects = bus.advertise("/perception/objects", ObjectList)
        self._cz = bus.advertise("/perception/cz_event", ConstructionZoneEvent)
        self._hb = bus.advertise("/health/perception", Heartbeat)
        self._first_seen: dict[str, int] = {}
        self._rng = np.random.default_rng(seed)
        self._delay: deque[ObjectList] = deque()

    def tick(self, tick: int) -> None:
        envs = self._truth.drain()
        if envs:
            truth = envs[-1].payload
            objs = sense(truth, self.sensor, truth.environment, self.map, tick, self._first_seen, self._rng)
            self._delay.append(ObjectList(tick, truth.tick, tuple(objs)))
        while self._delay and tick - self._delay[0].tick >= self.sensor.latency_ticks:
            batch = self._delay.popleft()
            out = replace(batch, tick=tick)
            self._objects.publish(out)
            ego_s = self._ego_s(envs[-1].payload) if envs else None
            if ego_s is not None:
                event = self.classifier.step(out.objects, ego_s, tick)
                if event is not None:
                    self._cz.publish(event)
        self._hb.publish(Heartbeat(self.name, tick))

    def _ego_s(self, truth: WorldTruth) -> float:
        s, _, _ = self.map.reference_line.to_frenet(truth.ego.x, truth.ego.y)
        return float(s[0])
