"""Motion control: longitudinal PID and lateral Stanley tracking a trajectory."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _core
from .messages import AUTOMATED_MODES, ControlCommand, ControlStatus, DriveMode, Heartbeat, ModeStatus
from .msgbus import MessageBus, QosPolicy
from .planner import Trajectory, TrajectoryPoint
from .worldsim import VehicleParams, VehicleState, wrap_angle

__all__ = [
    "EmptyTrajectory",
    "StaleTrajectory",
    "PidState",
    "StanleyConfig",
    "TrackingConfig",
    "pid_step",
    "stanley_step",
    "cross_track_error",
    "project_on_trajectory",
    "track",
    "ControlNode",
]


class EmptyTrajectory(Exception):
    pass


class StaleTrajectory(Exception):
    pass


@dataclass(frozen=True)
class PidState:
    kp: float = 0.8
    ki: float = 0.15
    kd: float = 0.0
    integral_limit: float = 1.0
    integral: float = 0.0
    prev_error: float = 0.0

    def reset(self) -> PidState:
        return replace(self, integral=0.0, prev_error=0.0)


@dataclass(frozen=True)
class StanleyConfig:
    k_gain: float = 2.5
    v_eps: float = 0.5
    delta_max: float = 0.6

    def __post_init__(self):
        if self.k_gain <= 0:
            raise ValueError("k_gain must be positive")
        if self.v_eps < 0:
            raise ValueError("v_eps must be non-negative")


@dataclass(frozen=True)
class TrackingConfig:
    t_look: float = 0.1
    max_staleness_ticks: int = 25
    wheelbase: float = 2.9
    # add the planned acceleration at the look-ahead point to the PID output
    accel_feedforward: bool = True


def pid_step(pid: PidState, v_ref: float, v_meas: float, dt: float) -> tuple[float, PidState]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = v_ref - v_meas
    lim = pid.integral_limit
    integral = min(max(pid.integral + e * dt, -lim), lim)
    a_cmd = pid.kp * e + pid.ki * integral + pid.kd * (e - pid.prev_error) / dt
    return a_cmd, replace(pid, integral=integral, prev_error=e)


def cross_track_error(target: TrajectoryPoint, state: VehicleState, wheelbase: float) -> float:
    """Signed offset of the path from the front axle, positive when the path is to the left."""
    fx = state.x + wheelbase * math.cos(state.psi)
    fy = state.y + wheelbase * math.sin(state.psi)
    return (target.x - fx) * -math.sin(target.psi) + (target.y - fy) * math.cos(target.psi)


def stanley_step(
    cfg: StanleyConfig,
    target: TrajectoryPoint | None,
    state: VehicleState,
    wheelbase: float = 2.9,
    e_fa: float | None = None,
) -> float:
    """Heading error plus the cross-track term, clamped to the steering limit.

    ``e_fa`` overrides the cross-track error computed from ``target``.
    """
    if target is None:
        raise EmptyTrajectory("no target point")
    psi_e = wrap_angle(target.psi - state.psi)
    if e_fa is None:
        e_fa = cross_track_error(target, state, wheelbase)
    delta = psi_e + math.atan2(cfg.k_gain * e_fa, state.v + cfg.v_eps)
    return min(max(delta, -cfg.delta_max), cfg.delta_max)


def project_on_trajectory(traj: Trajectory, x: float, y: float) -> float:
    """Fractional point index of the nearest point on the trajectory polyline.

    Ties go to the lower index.
    """
    arr = traj.arrays
    px, py = arr["x"], arr["y"]
    # zero-length segments (standstill) carry no direction; skip them
    keep = np.concatenate(([True], np.hypot(np.diff(px), np.diff(py)) > 1e-9))
    idx = np.flatnonzero(keep)
    if idx.size < 2:
        return 0.0
    pos, _, _, _ = _core.project_points([x], [y], px[idx], py[idx], idx.astype(float))
    return float(pos[0])


def _interp_point(traj: Trajectory, pos: float) -> TrajectoryPoint:
    pts = traj.points
    i = min(int(math.floor(pos)), len(pts) - 2)
    u = pos - i
    p, q = pts[i], pts[i + 1]
    lerp = lambda a, b: a + u * (b - a)  # noqa: E731
    return TrajectoryPoint(
        lerp(p.t_rel, q.t_rel), lerp(p.x, q.x), lerp(p.y, q.y),
        p.psi + u * wrap_angle(q.psi - p.psi), lerp(p.v, q.v), lerp(p.a, q.a),
        lerp(p.kappa, q.kappa), lerp(p.s, q.s), lerp(p.d, q.d),
    )


def track(
    trajectory: Trajectory | None,
    state: VehicleState,
    pid: PidState,
    stanley: StanleyConfig,
    dt: float,
    tick: int | None = None,
    cfg: TrackingConfig = TrackingConfig(),
) -> tuple[ControlCommand, PidState]:
    """One tracking step: PID on the look-ahead speed (plus planned acceleration), Stanley on the front axle."""
    if trajectory is None or not trajectory.points:
        raise EmptyTrajectory("no trajectory to track")
    if tick is not None and tick - trajectory.tick > cfg.max_staleness_ticks:
        raise StaleTrajectory(f"trajectory from tick {trajectory.tick} is stale at tick {tick}")
    n = len(trajectory.points)

    # speed reference: ego projection plus a short time look-ahead
    ref = _interp_point(trajectory, project_on_trajectory(trajectory, state.x, state.y))
    t_ref = ref.t_rel + cfg.t_look
    times = trajectory.arrays["t_rel"]
    look_pos = float(np.interp(t_ref, times, np.arange(n)))
    look = _interp_point(trajectory, look_pos)
    a_cmd, pid = pid_step(pid, look.v, state.v, dt)
    if cfg.accel_feedforward:
        a_cmd += look.a

    L = cfg.wheelbase
    fx = state.x + L * math.cos(state.psi)
    fy = state.y + L * math.sin(state.psi)
    target = _interp_point(trajectory, project_on_trajectory(trajectory, fx, fy))
    delta = stanley_step(stanley, target, state, L)
    return ControlCommand(a_cmd, delta, "controller", tick or 0), pid


class ControlNode:
    name = "control"

    def __init__(
        self,
        bus: MessageBus,
        params: VehicleParams,
        pid: PidState,
        stanley: StanleyConfig,
        qos: dict[str, QosPolicy],
        dt: float = 0.02,
        tracking: TrackingConfig | None = None,
    ):
        self.dt = dt
        self.pid0 = pid
        self.pid = pid
        self.stanley = stanley
        self.tracking = tracking or TrackingConfig(wheelbase=params.wheelbase)
        self._traj_sub = bus.subscribe("/plan/trajectory", Trajectory, qos["/plan/trajectory"])
        self._ego_sub = bus.subscribe("/ego/state", VehicleState, qos["/ego/state"])
        self._mode_sub = bus.subscribe("/mode/active", ModeStatus, qos["/mode/active"])
        self._cmd_pub = bus.advertise("/control/cmd", ControlCommand)
        self._status_pub = bus.advertise("/control/status", ControlStatus)
        self._hb = bus.advertise("/health/control", Heartbeat)
        self.mode = DriveMode.MANUAL
        self.trajectory: Trajectory | None = None
        self.ego: VehicleState | None = None
        self._fault = ""

    def tick(self, tick: int) -> None:
        trajs = self._traj_sub.drain()
        if trajs:
            self.trajectory = trajs[-1].payload
        ego = self._ego_sub.drain()
        if ego:
            self.ego = ego[-1].payload
        modes = self._mode_sub.drain()
        if modes:
            mode = modes[-1].payload.mode
            if mode in AUTOMATED_MODES and self.mode not in AUTOMATED_MODES:
                self.pid = self.pid0.reset()
            self.mode = mode

        if self.mode in AUTOMATED_MODES and self.ego is not None:
            fault = ""
            try:
                cmd, self.pid = track(self.trajectory, self.ego, self.pid, self.stanley, self.dt, tick, self.tracking)
            except (EmptyTrajectory, StaleTrajectory) as exc:
                cmd = ControlCommand(0.0, 0.0, "controller", tick)
                fault = f"{type(exc).__name__}: {exc}"
            self._cmd_pub.publish(cmd)
            if fault != self._fault:
                self._status_pub.publish(ControlStatus(tick, not fault, fault))
                self._fault = fault
        self._hb.publish(Heartbeat(self.name, tick))
