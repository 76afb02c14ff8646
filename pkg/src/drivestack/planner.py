"""Drive planning: global-path follower and Frenet sampling planner.

The Frenet planner samples lateral quintics toward a set of target offsets and
longitudinal quartics toward a set of target speeds, scores each pair with a
jerk/time/deviation cost, and returns the cheapest candidate that respects the
kinematic limits, stays inside the corridor and clears every obstacle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _core
from .hdmap import MapModel, OutOfCorridor
from .hdmap import FrenetPoint
from .messages import AUTOMATED_MODES, DriveMode, Heartbeat, ModeStatus, PlannerStatus
from .msgbus import MessageBus, QosPolicy
from .perception import ObjectList
from .polynomials import _jerk_sq_integral, quartic_coeffs, quintic_coeffs
from .worldsim import VehicleParams, VehicleState, wrap_angle

__all__ = [
    "NoFeasibleTrajectory",
    "TrajectoryPoint",
    "Trajectory",
    "PlannerConfig",
    "CandidateSet",
    "ego_frenet_state",
    "enumerate_candidates",
    "select_candidate",
    "sample_frenet",
    "follow_global",
    "stopping_trajectory",
    "collision_check",
    "PlannerProfile",
    "PlannerNode",
]

DEFAULT_FOOTPRINT = VehicleParams().footprint_circles

# rejection flags recorded per candidate
REJECT_SPEED = 1
REJECT_ACCEL = 2
REJECT_CURVATURE = 4
REJECT_CORRIDOR = 8
REJECT_COLLISION = 16
REJECT_REVERSE = 32

# relative cost window treated as a tie
TIE_RTOL = 1e-9


class NoFeasibleTrajectory(Exception):
    pass


@dataclass(frozen=True)
class TrajectoryPoint:
    t_rel: float
    x: float
    y: float
    psi: float
    v: float
    a: float
    kappa: float
    s: float
    d: float


@dataclass(frozen=True)
class Trajectory:
    points: tuple[TrajectoryPoint, ...]
    dt_traj: float
    cost: float
    feasible: bool
    planner_id: str
    tick: int = 0

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a trajectory needs at least 2 points")

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        names = ("t_rel", "x", "y", "psi", "v", "a", "kappa", "s", "d")
        return {n: np.array([getattr(p, n) for p in self.points]) for n in names}

    @classmethod
    def from_arrays(cls, t, x, y, psi, v, a, kappa, s, d, dt_traj, cost, feasible, planner_id, tick=0):
        pts = tuple(
            TrajectoryPoint(*map(float, row))
            for row in zip(t, x, y, psi, v, a, kappa, s, d)
        )
        return cls(pts, float(dt_traj), float(cost), bool(feasible), planner_id, tick)


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


@dataclass(frozen=True)
class PlannerConfig:
    k_j: float = 0.1
    k_t: float = 0.1
    k_d: float = 1.0
    k_s: float = 1.0
    k_lat: float = 1.0
    k_lon: float = 1.0
    d_targets: tuple[float, ...] = field(default_factory=lambda: _grid(-3.0, 3.0, 0.5))
    t_horizons: tuple[float, ...] = field(default_factory=lambda: _grid(2.0, 5.0, 0.5))
    # None derives {target_speed - 2, target_speed, target_speed + 2}
    v_targets: tuple[float, ...] | None = None
    v_max: float = 30.0
    a_max: float = 4.0
    kappa_max: float = 0.2
    safety_margin: float = 0.3
    target_speed: float = 22.0
    dt_traj: float = 0.1
    # lateral keep-out from the corridor edges for the reference point
    corridor_inset: float = 1.0

    def __post_init__(self):
        for name in ("k_j", "k_t", "k_d", "k_s", "k_lat", "k_lon"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "d_targets", tuple(float(x) for x in self.d_targets))
        object.__setattr__(self, "t_horizons", tuple(float(x) for x in self.t_horizons))
        if self.v_targets is not None:
            object.__setattr__(self, "v_targets", tuple(float(x) for x in self.v_targets))
        if not self.d_targets or not self.t_horizons or (self.v_targets is not None and not self.v_targets):
            raise ValueError("sampling grids must be non-empty")
        if any(T <= 0 for T in self.t_horizons):
            raise ValueError("horizons must be positive")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be non-negative")
        if self.dt_traj <= 0:
            raise ValueError("dt_traj must be positive")

    @property
    def speed_grid(self) -> tuple[float, ...]:
        if self.v_targets is not None:
            return tuple(max(0.0, v) for v in self.v_targets)
        ts = self.target_speed
        return (max(0.0, ts - 2.0), ts, ts + 2.0)

    @property
    def horizon(self) -> float:
        return max(self.t_horizons)

    def time_grid(self) -> np.ndarray:
        n = int(round(self.horizon / self.dt_traj))
        return np.arange(n + 1) * self.dt_traj


@dataclass
class CandidateSet:
    """Every sampled candidate with its cost and rejection flags, in grid order."""

    d_target: np.ndarray
    horizon: np.ndarray
    v_target: np.ndarray
    cost: np.ndarray
    reject: np.ndarray
    t: np.ndarray
    s: np.ndarray
    d: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    a: np.ndarray
    kappa: np.ndarray

    @property
    def feasible(self) -> np.ndarray:
        return self.reject == 0

    def __len__(self):
        return self.cost.shape[0]

    def trajectory(self, i: int, planner_id: str = "frenet", tick: int = 0) -> Trajectory:
        return Trajectory.from_arrays(
            self.t, self.x[i], self.y[i], self.psi[i], self.v[i], self.a[i],
            self.kappa[i], self.s[i], self.d[i],
            dt_traj=self.t[1] - self.t[0], cost=self.cost[i],
            feasible=self.reject[i] == 0, planner_id=planner_id, tick=tick,
        )


def ego_frenet_state(map_: MapModel, state: VehicleState, wheelbase: float = 2.9) -> FrenetPoint:
    """Frenet position and time derivatives of the rear-axle reference point."""
    ref = map_.reference_line
    s, d, dist = ref.to_frenet(state.x, state.y)
    s, d = float(s[0]), float(d[0])
    if dist[0] > map_.max_projection_distance:
        raise OutOfCorridor(f"ego is {dist[0]:.2f} m from the reference line")
    _, _, h = ref.evaluate(s)
    kr = float(ref.curvature(s))
    dpsi = wrap_angle(state.psi - float(h))
    one_minus = 1.0 - kr * d
    c, sn = math.cos(dpsi), math.sin(dpsi)
    s_dot = state.v * c / one_minus
    d_dot = state.v * sn
    yaw_rate = state.v * math.tan(state.delta) / wheelbase
    s_ddot = state.a * c
    d_ddot = state.a * sn + state.v * c * (yaw_rate - kr * s_dot)
    return FrenetPoint(s, d, s_dot, s_ddot, d_dot, d_ddot)


def _obstacle_arrays(obstacles):
    obs = list(obstacles)
    return (
        np.array([o.x for o in obs], dtype=float),
        np.array([o.y for o in obs], dtype=float),
        np.array([getattr(o, "vx", 0.0) for o in obs], dtype=float),
        np.array([getattr(o, "vy", 0.0) for o in obs], dtype=float),
        np.array([o.radius for o in obs], dtype=float),
    )


def _footprint_arrays(footprint):
    return (
        np.array([c[0] for c in footprint], dtype=float),
        np.array([c[1] for c in footprint], dtype=float),
    )


def _kinematics(ref, t, s, s_dot, d, d_dot):
    """Cartesian pose, speed, acceleration and curvature of Frenet samples."""
    x, y, h = ref.to_cartesian(s, d)
    kr = ref.curvature(s)
    one_minus = 1.0 - kr * d
    vs = s_dot * one_minus
    psi = h + np.arctan2(d_dot, vs)
    v = np.hypot(vs, d_dot)
    a = np.gradient(v, t, axis=-1)
    dx = np.diff(x, axis=-1)
    dy = np.diff(y, axis=-1)
    ds = np.hypot(dx, dy)
    dpsi = np.angle(np.exp(1j * np.diff(psi, axis=-1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(ds > 1e-3, dpsi / np.where(ds > 1e-3, ds, 1.0), 0.0)
    kappa = np.concatenate([k, k[..., -1:]], axis=-1)
    psi = np.angle(np.exp(1j * psi))
    return x, y, psi, v, a, kappa


def enumerate_candidates(
    map_: MapModel,
    ego: FrenetPoint,
    obstacles,
    cfg: PlannerConfig,
    footprint=DEFAULT_FOOTPRINT,
) -> CandidateSet:
    """Build, score and check every (d_target, T, v_target) candidate.

    Candidates are ordered with d_target outermost and v_target innermost.
    Each candidate is extended past its own T to the common horizon by holding
    the terminal offset and speed, so candidates are compared over the same
    time span.
    """
    ref = map_.reference_line
    d_lo, d_hi = map_.d_bounds
    d_lo += cfg.corridor_inset
    d_hi -= cfg.corridor_inset
    d_grid = np.array([d for d in cfg.d_targets if d_lo - 1e-9 <= d <= d_hi + 1e-9])
    if d_grid.size == 0:
        raise NoFeasibleTrajectory("no lateral target inside the corridor")
    T_grid = np.array(cfg.t_horizons)
    v_grid = np.array(cfg.speed_grid)
    D, TT, V = (g.ravel() for g in np.meshgrid(d_grid, T_grid, v_grid, indexing="ij"))
    t = cfg.time_grid()

    Tc = TT[:, None]
    tc = np.minimum(t[None, :], Tc)
    rest = t[None, :] - tc

    l0, l1, l2, l3, l4, l5 = (c[:, None] for c in np.broadcast_arrays(
        *quintic_coeffs(ego.d, ego.d_dot, ego.d_ddot, D, 0.0, 0.0, TT)))
    d = l0 + tc * (l1 + tc * (l2 + tc * (l3 + tc * (l4 + tc * l5))))
    d_dot = l1 + tc * (2 * l2 + tc * (3 * l3 + tc * (4 * l4 + tc * 5 * l5)))

    m0, m1, m2, m3, m4 = (c[:, None] for c in np.broadcast_arrays(
        *quartic_coeffs(ego.s, ego.s_dot, ego.s_ddot, V, 0.0, TT)))
    s_c = m0 + tc * (m1 + tc * (m2 + tc * (m3 + tc * m4)))
    s_dot = m1 + tc * (2 * m2 + tc * (3 * m3 + tc * 4 * m4))
    s = s_c + s_dot * rest

    j_lat = _jerk_sq_integral(6 * l3[:, 0], 24 * l4[:, 0], 60 * l5[:, 0], TT)
    j_lon = _jerk_sq_integral(6 * m3[:, 0], 24 * m4[:, 0], 0.0, TT)
    c_lat = cfg.k_j * j_lat + cfg.k_t * TT + cfg.k_d * D * D
    c_lon = cfg.k_j * j_lon + cfg.k_t * TT + cfg.k_s * (V - cfg.target_speed) ** 2
    cost = cfg.k_lat * c_lat + cfg.k_lon * c_lon

    x, y, psi, v, a, kappa = _kinematics(ref, t, s, s_dot, d, d_dot)

    eps = 1e-9
    reject = np.zeros(D.shape[0], dtype=np.int64)
    reject |= np.where((s_dot < -eps).any(axis=1), REJECT_REVERSE, 0)
    reject |= np.where((v > cfg.v_max + eps).any(axis=1), REJECT_SPEED, 0)
    reject |= np.where((np.abs(a) > cfg.a_max + eps).any(axis=1), REJECT_ACCEL, 0)
    reject |= np.where((np.abs(kappa) > cfg.kappa_max + eps).any(axis=1), REJECT_CURVATURE, 0)
    reject |= np.where(((d < d_lo - eps) | (d > d_hi + eps)).any(axis=1), REJECT_CORRIDOR, 0)

    check = np.flatnonzero(reject == 0)
    obs = list(obstacles)
    if obs and check.size:
        ox, oy, ovx, ovy, orad = _obstacle_arrays(obs)
        fo, fr = _footprint_arrays(footprint)
        hit = _core.collide_batch(
            x[check], y[check], psi[check], t, fo, fr, ox, oy, ovx, ovy, orad, cfg.safety_margin
        )
        reject[check[hit]] |= REJECT_COLLISION

    return CandidateSet(D, TT, V, cost, reject, t, s, d, x, y, psi, v, a, kappa)


def select_candidate(cands: CandidateSet) -> int:
    """Index of the cheapest feasible candidate.

    Costs within a relative 1e-9 of the minimum tie; ties go to the smaller
    ``|d_target|``, then the shorter horizon, then grid order.
    """
    ok = np.flatnonzero(cands.feasible)
    if ok.size == 0:
        raise NoFeasibleTrajectory("every candidate was rejected")
    cmin = cands.cost[ok].min()
    tol = TIE_RTOL * max(1.0, abs(cmin))
    tied = ok[cands.cost[ok] <= cmin + tol]
    order = np.lexsort((tied, cands.horizon[tied], np.abs(cands.d_target[tied])))
    return int(tied[order[0]])


def sample_frenet(
    map_: MapModel,
    ego: FrenetPoint,
    obstacles,
    cfg: PlannerConfig,
    footprint=DEFAULT_FOOTPRINT,
    tick: int = 0,
) -> Trajectory:
    cands = enumerate_candidates(map_, ego, obstacles, cfg, footprint)
    i = select_candidate(cands)
    return cands.trajectory(i, "frenet", tick)


def follow_global(map_: MapModel, state: VehicleState, cfg: PlannerConfig, tick: int = 0) -> Trajectory:
    """Centerline trajectory with a constant-acceleration ramp toward the target speed."""
    ref = map_.reference_line
    s, d, dist = ref.to_frenet(state.x, state.y)
    s0, d0 = float(s[0]), float(d[0])
    d_lo, d_hi = map_.d_bounds
    if dist[0] > map_.max_projection_distance or not d_lo <= d0 <= d_hi:
        raise OutOfCorridor(f"ego at d={d0:.2f} is outside the corridor")
    v_goal = min(cfg.target_speed, map_.speed_limit)
    t = cfg.time_grid()
    v0 = state.v
    dv = v_goal - v0
    acc = math.copysign(cfg.a_max, dv) if dv != 0 else 0.0
    t_ramp = abs(dv) / cfg.a_max if cfg.a_max > 0 else 0.0
    tr = np.minimum(t, t_ramp)
    v = v0 + acc * tr
    sp = s0 + v0 * tr + 0.5 * acc * tr * tr + v * (t - tr)
    a = np.where(t < t_ramp, acc, 0.0)
    x, y, h = ref.to_cartesian(sp, np.zeros_like(sp))
    kappa = ref.curvature(sp)
    return Trajectory.from_arrays(
        t, x, y, h, v, a, kappa, sp, np.zeros_like(sp),
        dt_traj=cfg.dt_traj, cost=0.0, feasible=True, planner_id="global", tick=tick,
    )


def stopping_trajectory(map_: MapModel, state: VehicleState, cfg: PlannerConfig, tick: int = 0) -> Trajectory:
    """Brake to standstill at ``cfg.a_max`` while holding the current lateral offset."""
    ref = map_.reference_line
    s, d, _ = ref.to_frenet(state.x, state.y)
    s0, d0 = float(s[0]), float(d[0])
    t = cfg.time_grid()
    t_stop = state.v / cfg.a_max
    tr = np.minimum(t, t_stop)
    v = state.v - cfg.a_max * tr
    sp = s0 + state.v * tr - 0.5 * cfg.a_max * tr * tr
    dd = np.full_like(sp, d0)
    x, y, h = ref.to_cartesian(sp, dd)
    a = np.where(t < t_stop, -cfg.a_max, 0.0)
    return Trajectory.from_arrays(
        t, x, y, h, v, a, ref.curvature(sp), sp, dd,
        dt_traj=cfg.dt_traj, cost=0.0, feasible=False,
        planner_id="fallback_stop", tick=tick,
    )


def collision_check(traj: Trajectory, obstacles, footprint=DEFAULT_FOOTPRINT, margin: float = 0.0) -> bool:
    """True iff some footprint circle at some point overlaps an obstacle inflated by ``margin``."""
    obs = list(obstacles)
    if not obs:
        return False
    arr = traj.arrays
    ox, oy, ovx, ovy, orad = _obstacle_arrays(obs)
    fo, fr = _footprint_arrays(footprint)
    hit = _core.collide_batch(
        arr["x"][None, :], arr["y"][None, :], arr["psi"][None, :], arr["t_rel"],
        fo, fr, ox, oy, ovx, ovy, orad, margin,
    )
    return bool(hit[0])


@dataclass(frozen=True)
class PlannerProfile:
    kind: str = "global"  # global | frenet
    config: PlannerConfig = field(default_factory=PlannerConfig)
    ignore_kinds: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in ("global", "frenet"):
            raise ValueError(f"unknown planner kind {self.kind!r}")
        object.__setattr__(self, "ignore_kinds", frozenset(self.ignore_kinds))


class PlannerNode:
    """Replans every ``replan_ticks`` in automated modes, or on request."""

    name = "planner"

    def __init__(
        self,
        bus: MessageBus,
        map_: MapModel,
        params: VehicleParams,
        profiles: dict,
        qos: dict[str, QosPolicy],
        replan_ticks: int = 10,
    ):
        self.map = map_
        self.params = params
        self.profiles = {DriveMode(k): v for k, v in profiles.items()}
        self.replan_ticks = replan_ticks
        self._objects_sub = bus.subscribe("/perception/objects", ObjectList, qos["/perception/objects"])
        self._ego_sub = bus.subscribe("/ego/state", VehicleState, qos["/ego/state"])
        self._mode_sub = bus.subscribe("/mode/active", ModeStatus, qos["/mode/active"])
        self._traj_pub = bus.advertise("/plan/trajectory", Trajectory)
        self._status_pub = bus.advertise("/plan/status", PlannerStatus)
        self._hb = bus.advertise("/health/planner", Heartbeat)
        bus.register_service("plan/replan_now", self._replan_now)
        self.mode = DriveMode.MANUAL
        self.profile_mode = DriveMode.AUTOPILOT
        self.objects = ()
        self.ego: VehicleState | None = None
        self.last_plan_tick: int | None = None
        self._forced = False

    def _replan_now(self, mode=None):
        if mode is not None:
            self.mode = DriveMode(mode)
        self._forced = True
        return True

    def plan(self, profile: PlannerProfile, tick: int) -> tuple[Trajectory, PlannerStatus]:
        cfg = profile.config
        ego = self.ego
        if profile.kind == "global":
            traj = follow_global(self.map, ego, cfg, tick)
            return traj, PlannerStatus(tick, True, "global")
        obstacles = [o for o in self.objects if o.kind not in profile.ignore_kinds]
        try:
            fs = ego_frenet_state(self.map, ego, self.params.wheelbase)
            traj = sample_frenet(self.map, fs, obstacles, cfg, self.params.footprint_circles, tick)
            return traj, PlannerStatus(tick, True, "frenet")
        except (NoFeasibleTrajectory, OutOfCorridor) as exc:
            traj = stopping_trajectory(self.map, ego, cfg, tick)
            return traj, PlannerStatus(tick, False, "frenet", str(exc))

    def tick(self, tick: int) -> None:
        objs = self._objects_sub.drain()
        if objs:
            self.objects = objs[-1].payload.objects
        ego = self._ego_sub.drain()
        if ego:
            self.ego = ego[-1].payload
        modes = self._mode_sub.drain()
        if modes and not self._forced:
            self.mode = modes[-1].payload.mode

        if self.mode in (DriveMode.AUTOPILOT, DriveMode.CZA):
            self.profile_mode = self.mode
        if self.mode in AUTOMATED_MODES and self.ego is not None:
            due = self.last_plan_tick is None or tick - self.last_plan_tick >= self.replan_ticks
            if self._forced or due:
                profile = self.profiles.get(self.profile_mode) or PlannerProfile()
                traj, status = self.plan(profile, tick)
                self._traj_pub.publish(traj)
                self._status_pub.publish(status)
                self.last_plan_tick = tick
        else:
            self.last_plan_tick = None
        self._forced = False
        self._hb.publish(Heartbeat(self.name, tick))
