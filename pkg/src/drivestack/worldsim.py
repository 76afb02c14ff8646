"""Ground-truth world: kinematic bicycle ego, actuation stage, obstacles, weather."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace

import numpy as np

from .hdmap import MapModel
from .messages import ControlCommand, Heartbeat
from .msgbus import MessageBus, QosPolicy

__all__ = [
    "WEATHER_LEVELS",
    "VehicleState",
    "VehicleParams",
    "Obstacle",
    "Environment",
    "WorldTruth",
    "WorldMetrics",
    "wrap_angle",
    "apply_command",
    "step",
    "footprint_clearance",
    "World",
    "WorldNode",
]

WEATHER_LEVELS = ("clear", "rain_light", "rain_heavy")
OBSTACLE_KINDS = ("cone", "barrier", "vehicle_static")
# clearance reported when no obstacle exists (JSON has no infinity)
NO_OBSTACLE = 1e9


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    psi: float
    v: float
    a: float = 0.0
    delta: float = 0.0
    t: float = 0.0
    tick: int = 0


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.9
    delta_max: float = 0.6
    a_min: float = -8.0
    a_max: float = 3.0
    steer_rate_max: float = 0.7
    accel_rate_max: float = 10.0
    # (offset along body x from the rear axle, radius)
    footprint_circles: tuple[tuple[float, float], ...] = (
        (0.1, 1.15),
        (1.35, 1.15),
        (2.6, 1.15),
    )

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("need a_min < 0 < a_max")
        if self.steer_rate_max <= 0 or self.accel_rate_max <= 0:
            raise ValueError("rate limits must be positive")
        if len(self.footprint_circles) < 1 or any(r <= 0 for _, r in self.footprint_circles):
            raise ValueError("footprint needs at least one circle with positive radius")

    @property
    def footprint_offsets(self) -> np.ndarray:
        return np.array([c[0] for c in self.footprint_circles], dtype=float)

    @property
    def footprint_radii(self) -> np.ndarray:
        return np.array([c[1] for c in self.footprint_circles], dtype=float)

    @property
    def front_reach(self) -> float:
        """Distance from the rear axle to the front of the footprint."""
        return max(off + r for off, r in self.footprint_circles)


@dataclass(frozen=True)
class Obstacle:
    id: str
    kind: str
    x: float
    y: float
    radius: float
    vx: float = 0.0
    vy: float = 0.0
    cz_group: str | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"obstacle {self.id!r}: radius must be positive")
        if self.kind not in OBSTACLE_KINDS:
            raise ValueError(f"obstacle {self.id!r}: unknown kind {self.kind!r}")

    def at(self, t: float) -> Obstacle:
        if self.vx == 0.0 and self.vy == 0.0:
            return self
        return replace(self, x=self.x + self.vx * t, y=self.y + self.vy * t)


@dataclass(frozen=True)
class Environment:
    weather: str = "clear"
    visibility: float = 1000.0

    def __post_init__(self):
        if self.weather not in WEATHER_LEVELS:
            raise ValueError(f"unknown weather {self.weather!r}")
        if self.visibility <= 0:
            raise ValueError("visibility must be positive")


@dataclass(frozen=True)
class WorldTruth:
    tick: int
    ego: VehicleState
    obstacles: tuple[Obstacle, ...]
    environment: Environment


@dataclass(frozen=True)
class WorldMetrics:
    tick: int
    s: float
    d: float
    v: float
    min_clearance: float
    nearest_obstacle: str
    collision: bool
    command_source: str
    a_saturated: bool
    delta_saturated: bool


def apply_command(state: VehicleState, params: VehicleParams, cmd: ControlCommand, dt: float):
    """Actuation stage: clamp to limits, then rate-limit against the last applied values."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = min(max(cmd.a_cmd, params.a_min), params.a_max)
    delta = min(max(cmd.delta_cmd, -params.delta_max), params.delta_max)
    da = params.accel_rate_max * dt
    dd = params.steer_rate_max * dt
    a = min(max(a, state.a - da), state.a + da)
    delta = min(max(delta, state.delta - dd), state.delta + dd)
    return a, delta


def step(state: VehicleState, params: VehicleParams, a: float, delta: float, dt: float) -> VehicleState:
    """Kinematic bicycle about the rear axle, semi-implicit Euler."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = max(0.0, state.v + a * dt)
    psi = wrap_angle(state.psi + v / params.wheelbase * math.tan(delta) * dt)
    x = state.x + v * math.cos(psi) * dt
    y = state.y + v * math.sin(psi) * dt
    tick = state.tick + 1
    return VehicleState(x, y, psi, v, a, delta, tick * dt, tick)


def footprint_clearance(state: VehicleState, params: VehicleParams, obstacles) -> tuple[float, str]:
    """Smallest gap between any footprint circle and any obstacle (negative = overlap)."""
    best = math.inf
    best_id = ""
    c, s = math.cos(state.psi), math.sin(state.psi)
    for off, r in params.footprint_circles:
        cx = state.x + off * c
        cy = state.y + off * s
        for ob in obstacles:
            gap = math.hypot(cx - ob.x, cy - ob.y) - r - ob.radius
            if gap < best:
                best = gap
                best_id = ob.id
    return best, best_id


class World:
    """Owns ground truth and advances it by one fixed tick per call."""

    def __init__(
        self,
        map_: MapModel,
        params: VehicleParams,
        initial: VehicleState,
        obstacles=(),
        environment_timeline=((0.0, Environment()),),
        dt: float = 0.02,
    ):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.map = map_
        self.params = params
        self.dt = dt
        self.state = replace(initial, t=0.0, tick=0)
        self.obstacles = tuple(obstacles)
        timeline = sorted(environment_timeline, key=lambda e: e[0])
        self._env_times = [t for t, _ in timeline]
        self._envs = [e for _, e in timeline]
        self.last_saturation = (False, False)
        self.last_source = "none"

    @property
    def tick(self) -> int:
        return self.state.tick

    def environment_at(self, t: float) -> Environment:
        i = bisect.bisect_right(self._env_times, t + 1e-12) - 1
        return self._envs[max(i, 0)]

    def obstacles_at(self, t: float) -> tuple[Obstacle, ...]:
        return tuple(o.at(t) for o in self.obstacles)

    def ground_truth(self) -> WorldTruth:
        t = self.state.t
        return WorldTruth(self.state.tick, self.state, self.obstacles_at(t), self.environment_at(t))

    def advance(self, cmd: ControlCommand | None) -> VehicleState:
        if cmd is None:
            cmd = ControlCommand(0.0, 0.0)
            self.last_source = "none"
        else:
            self.last_source = cmd.source
        a, delta = apply_command(self.state, self.params, cmd, self.dt)
        self.last_saturation = (a != cmd.a_cmd, delta != cmd.delta_cmd)
        self.state = step(self.state, self.params, a, delta, self.dt)
        return self.state

    def metrics(self) -> WorldMetrics:
        st = self.state
        s, d, _ = self.map.reference_line.to_frenet(st.x, st.y)
        clearance, nearest = footprint_clearance(st, self.params, self.obstacles_at(st.t))
        return WorldMetrics(
            tick=st.tick,
            s=float(s[0]),
            d=float(d[0]),
            v=st.v,
            min_clearance=clearance if math.isfinite(clearance) else NO_OBSTACLE,
            nearest_obstacle=nearest,
            collision=clearance < 0.0,
            command_source=self.last_source,
            a_saturated=self.last_saturation[0],
            delta_saturated=self.last_saturation[1],
        )


class WorldNode:
    """Scheduler slot for the world: actuation, integration, truth publication."""

    name = "worldsim"

    def __init__(self, bus: MessageBus, world: World, qos: dict[str, QosPolicy]):
        self.bus = bus
        self.world = world
        self._cmd = bus.subscribe("/control/cmd", ControlCommand, qos["/control/cmd"])
        self._truth = bus.advertise("/world/truth", WorldTruth)
        self._ego = bus.advertise("/ego/state", VehicleState)
        self._metrics = bus.advertise("/world/metrics", WorldMetrics)
        self._hb = bus.advertise("/health/worldsim", Heartbeat)
        self.latest_metrics: WorldMetrics | None = None

    @staticmethod
    def select_command(envelopes) -> ControlCommand | None:
        """Latest override if any was sent, else the latest controller command."""
        chosen = None
        override = None
        for env in envelopes:
            if env.payload.source == "emergency_override":
                override = env.payload
            else:
                chosen = env.payload
        return override if override is not None else chosen

    def tick(self, tick: int) -> None:
        cmds = self._cmd.drain()
        if tick > 0:
            self.world.advance(self.select_command(cmds))
        self.latest_metrics = self.world.metrics()
        self._truth.publish(self.world.ground_truth())
        self._ego.publish(self.world.state)
        self._metrics.publish(self.latest_metrics)
        self._hb.publish(Heartbeat(self.name, tick))
