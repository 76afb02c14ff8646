"""Scenario files: JSON object trees describing one closed-loop run."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..control import PidState, StanleyConfig, TrackingConfig
from ..hdmap import FrenetPoint, MapError, MapModel, ReferenceLine, frenet_to_cartesian
from ..hmi import DriverModel
from ..messages import DriveMode
from ..mode_manager import ModeConfig
from ..odd import OddDefinition
from ..perception import SensorConfig, ZoneConfig
from ..planner import PlannerConfig, PlannerProfile
from ..worldsim import OBSTACLE_KINDS, WEATHER_LEVELS, Environment, Obstacle, VehicleParams, VehicleState

__all__ = [
    "ScenarioError",
    "ParseError",
    "ValidationError",
    "LateralOffsetCriterion",
    "ModeBeforeCriterion",
    "PassCriteria",
    "ScenarioSpec",
    "load_scenario",
    "parse_scenario",
    "bundled_scenario",
    "BUNDLED_DIR",
]

BUNDLED_DIR = Path(__file__).resolve().parent.parent / "scenarios"

_TOP_KEYS = {
    "name", "description", "duration_s", "seed", "dt", "map", "ego", "obstacles", "environment",
    "driver", "odd", "perception", "zone", "planner", "control", "mode", "qos", "pass_criteria",
}


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(ScenarioError):
    """``field`` names the offending entry, e.g. ``"map"`` or ``"duration_s"``."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


@dataclass(frozen=True)
class LateralOffsetCriterion:
    s_from: float
    max_abs_d: float


@dataclass(frozen=True)
class ModeBeforeCriterion:
    mode: DriveMode
    s: float


@dataclass(frozen=True)
class PassCriteria:
    require_no_collision: bool = False
    require_route_completion_s: float | None = None
    min_obstacle_clearance: float | None = None
    max_speed_in_zone: float | None = None
    required_mode_sequence: tuple[DriveMode, ...] = ()
    max_final_lateral_offset: LateralOffsetCriterion | None = None
    mode_entered_before_s: ModeBeforeCriterion | None = None
    require_stop: bool = False


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    duration_s: float
    seed: int
    dt: float
    map: MapModel
    ego: VehicleState
    params: VehicleParams
    obstacles: tuple[Obstacle, ...]
    environment: tuple[tuple[float, Environment], ...]
    driver: DriverModel
    odd: tuple[OddDefinition, ...]
    sensor: SensorConfig
    zone: ZoneConfig
    profiles: dict
    replan_ticks: int
    pid: PidState
    stanley: StanleyConfig
    tracking: TrackingConfig
    mode: ModeConfig
    qos: dict
    criteria: PassCriteria
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s / self.dt))


def _section(data: dict, key: str, required: bool = False) -> dict:
    if key not in data:
        if required:
            raise ValidationError(key, "section is required")
        return {}
    sec = data[key]
    if not isinstance(sec, dict):
        raise ValidationError(key, "must be an object")
    return sec


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _build(cls, data: dict, path: str, **fixed):
    """Construct dataclass ``cls`` from ``data``, reporting problems against ``path``."""
    if not isinstance(data, dict):
        raise ValidationError(path, "must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"{path}.{unknown[0]}", "unknown field")
    kwargs = {k: _tuplify(v) for k, v in data.items()}
    kwargs.update(fixed)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(path, str(exc)) from None


def _number(data: dict, key: str, path: str, default=None, positive=False, nonneg=False) -> float:
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(path, "must be a finite number")
    if positive and v <= 0:
        raise ValidationError(path, "must be positive")
    if nonneg and v < 0:
        raise ValidationError(path, "must be non-negative")
    return float(v)


def _map(sec: dict) -> MapModel:
    allowed = {"waypoints", "lane_count", "lane_width", "speed_limit", "road_type",
               "ref_lane_index", "resample_step", "max_projection_distance"}
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ValidationError(f"map.{unknown[0]}", "unknown field")
    wps = sec.get("waypoints")
    if not isinstance(wps, list) or len(wps) < 2:
        raise ValidationError("map.waypoints", "needs at least two [x, y] points")
    try:
        pts = [(float(p[0]), float(p[1])) for p in wps]
    except (TypeError, ValueError, IndexError):
        raise ValidationError("map.waypoints", "points must be [x, y] pairs") from None
    step = sec.get("resample_step", 1.0)
    try:
        line = ReferenceLine.resampled(pts, step) if step else ReferenceLine(pts)
        kwargs = {k: sec[k] for k in allowed - {"waypoints", "resample_step"} if k in sec}
        return MapModel(line, **kwargs)
    except (TypeError, ValueError, MapError) as exc:
        raise ValidationError("map", str(exc)) from None


def _ego(sec: dict, map_: MapModel) -> tuple[VehicleState, VehicleParams]:
    allowed = {"pose", "s", "d", "heading_offset", "speed", "params"}
    unknown = sorted(set(sec) - allowed)
    if unknown:
        raise ValidationError(f"ego.{unknown[0]}", "unknown field")
    params = _build(VehicleParams, sec.get("params", {}), "ego.params")
    speed = _number(sec, "speed", "ego.speed", 0.0, nonneg=True)
    if "pose" in sec:
        try:
            x, y, psi = (float(v) for v in sec["pose"])
        except (TypeError, ValueError):
            raise ValidationError("ego.pose", "must be [x, y, psi]") from None
    else:
        s = _number(sec, "s", "ego.s", 0.0)
        d = _number(sec, "d", "ego.d", 0.0)
        try:
            x, y, h = frenet_to_cartesian(map_, FrenetPoint(s, d))
        except MapError as exc:
            raise ValidationError("ego.s", str(exc)) from None
        psi = h + _number(sec, "heading_offset", "ego.heading_offset", 0.0)
    s_arr, d_arr, _ = map_.reference_line.to_frenet(x, y)
    lo, hi = map_.d_bounds
    if not (lo <= float(d_arr[0]) <= hi) or not (0.0 <= float(s_arr[0]) <= map_.length):
        raise ValidationError("ego", "start pose is outside the corridor")
    return VehicleState(x, y, psi, speed), params


def _obstacles(items, map_: MapModel) -> tuple[Obstacle, ...]:
    if not isinstance(items, list):
        raise ValidationError("obstacles", "must be a list")
    out = []
    seen = set()
    for i, item in enumerate(items):
        path = f"obstacles[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(path, "must be an object")
        item = dict(item)
        oid = str(item.pop("id", f"obj_{i:03d}"))
        if oid in seen:
            raise ValidationError(f"{path}.id", f"duplicate id {oid!r}")
        seen.add(oid)
        if item.get("kind") not in OBSTACLE_KINDS:
            raise ValidationError(f"{path}.kind", f"must be one of {OBSTACLE_KINDS}")
        if "s" in item or "d" in item:
            s = _number(item, "s", f"{path}.s", 0.0)
            d = _number(item, "d", f"{path}.d", 0.0)
            item.pop("s", None)
            item.pop("d", None)
            x, y, _ = map_.reference_line.to_cartesian(s, d)
            item["x"], item["y"] = float(x), float(y)
        if "velocity" in item:
            vel = item.pop("velocity")
            try:
                item["vx"], item["vy"] = float(vel[0]), float(vel[1])
            except (TypeError, ValueError, IndexError):
                raise ValidationError(f"{path}.velocity", "must be [vx, vy]") from None
        _number(item, "radius", f"{path}.radius", None, positive=True)
        out.append(_build(Obstacle, item, path, id=oid))
    return tuple(out)


def _environment(items) -> tuple[tuple[float, Environment], ...]:
    if not items:
        return ((0.0, Environment()),)
    if not isinstance(items, list):
        raise ValidationError("environment", "must be a list")
    out = []
    last = -math.inf
    for i, item in enumerate(items):
        path = f"environment[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(path, "must be an object")
        t = _number(item, "time_s", f"{path}.time_s", None, nonneg=True)
        if t < last:
            raise ValidationError("environment", "timeline times must be sorted")
        last = t
        if item.get("weather", "clear") not in WEATHER_LEVELS:
            raise ValidationError(f"{path}.weather", f"must be one of {WEATHER_LEVELS}")
        rest = {k: v for k, v in item.items() if k != "time_s"}
        out.append((t, _build(Environment, rest, path)))
    return tuple(out)


def _mode_key(key: str, path: str) -> DriveMode:
    try:
        return DriveMode(key)
    except ValueError:
        raise ValidationError(path, f"unknown mode {key!r}") from None


def _planner(sec: dict) -> tuple[dict, int]:
    unknown = sorted(set(sec) - {"profiles", "replan_ticks"})
    if unknown:
        raise ValidationError(f"planner.{unknown[0]}", "unknown field")
    replan = sec.get("replan_ticks", 10)
    if not isinstance(replan, int) or replan < 1:
        raise ValidationError("planner.replan_ticks", "must be a positive integer")
    profiles = {
        DriveMode.AUTOPILOT: PlannerProfile("global", PlannerConfig()),
        DriveMode.CZA: PlannerProfile("frenet", PlannerConfig()),
    }
    for key, prof in sec.get("profiles", {}).items():
        path = f"planner.profiles.{key}"
        mode = _mode_key(key, path)
        if not isinstance(prof, dict):
            raise ValidationError(path, "must be an object")
        cfg = _build(PlannerConfig, prof.get("config", {}), f"{path}.config")
        rest = {k: v for k, v in prof.items() if k != "config"}
        profiles[mode] = _build(PlannerProfile, rest, path, config=cfg)
    return profiles, replan


def _odd(sec: dict) -> tuple[OddDefinition, ...]:
    defs = {
        DriveMode.AUTOPILOT: OddDefinition(DriveMode.AUTOPILOT),
        DriveMode.CZA: OddDefinition(DriveMode.CZA, construction_zone_permitted=True),
    }
    for key, body in sec.items():
        mode = _mode_key(key, f"odd.{key}")
        defs[mode] = _build(OddDefinition, body, f"odd.{key}", mode=mode)
    return tuple(defs[m] for m in sorted(defs, key=list(DriveMode).index))


def _criteria(sec: dict) -> PassCriteria:
    sec = dict(sec)
    for key in ("require_route_completion_s", "min_obstacle_clearance", "max_speed_in_zone"):
        if sec.get(key) is not None:
            _number(sec, key, f"pass_criteria.{key}", nonneg=True)
    if "required_mode_sequence" in sec:
        seq = sec["required_mode_sequence"]
        if not isinstance(seq, list):
            raise ValidationError("pass_criteria.required_mode_sequence", "must be a list")
        sec["required_mode_sequence"] = tuple(
            _mode_key(m, "pass_criteria.required_mode_sequence") for m in seq
        )
    if sec.get("max_final_lateral_offset") is not None:
        path = "pass_criteria.max_final_lateral_offset"
        lat = _build(LateralOffsetCriterion, sec["max_final_lateral_offset"], path)
        if lat.max_abs_d < 0:
            raise ValidationError(path, "thresholds must be non-negative")
        sec["max_final_lateral_offset"] = lat
    if sec.get("mode_entered_before_s") is not None:
        path = "pass_criteria.mode_entered_before_s"
        body = dict(sec["mode_entered_before_s"])
        body["mode"] = _mode_key(body.get("mode", ""), path)
        sec["mode_entered_before_s"] = _build(ModeBeforeCriterion, body, path)
    return _build(PassCriteria, sec, "pass_criteria")


def parse_scenario(data: Any, source: str = "<scenario>") -> ScenarioSpec:
    """Validate a decoded scenario object tree and fill in defaults."""
    if not isinstance(data, dict):
        raise ValidationError("scenario", "top level must be an object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ValidationError(unknown[0], "unknown field")
    map_ = _map(_section(data, "map", required=True))
    duration = _number(data, "duration_s", "duration_s", None, positive=True)
    dt = _number(data, "dt", "dt", 0.02, positive=True)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed", "must be a non-negative integer")
    ego, params = _ego(_section(data, "ego", required=True), map_)

    control = _section(data, "control")
    unknown = sorted(set(control) - {"pid", "stanley", "tracking"})
    if unknown:
        raise ValidationError(f"control.{unknown[0]}", "unknown field")
    tracking = {"wheelbase": params.wheelbase, **control.get("tracking", {})}
    stanley = {"delta_max": params.delta_max, **control.get("stanley", {})}

    qos = {}
    for topic, depth in _section(data, "qos").items():
        if not isinstance(depth, int) or isinstance(depth, bool) or depth < 1:
            raise ValidationError(f"qos.{topic}", "depth must be a positive integer")
        qos[topic] = depth

    profiles, replan = _planner(_section(data, "planner"))
    driver = _build(DriverModel, _section(data, "driver"), "driver")
    return ScenarioSpec(
        name=str(data.get("name", Path(source).stem)),
        description=str(data.get("description", "")),
        duration_s=duration,
        seed=seed,
        dt=dt,
        map=map_,
        ego=ego,
        params=params,
        obstacles=_obstacles(data.get("obstacles", []), map_),
        environment=_environment(data.get("environment", [])),
        driver=driver,
        odd=_odd(_section(data, "odd")),
        sensor=_build(SensorConfig, _section(data, "perception"), "perception"),
        zone=_build(ZoneConfig, _section(data, "zone"), "zone"),
        profiles=profiles,
        replan_ticks=replan,
        pid=_build(PidState, control.get("pid", {}), "control.pid"),
        stanley=_build(StanleyConfig, stanley, "control.stanley"),
        tracking=_build(TrackingConfig, tracking, "control.tracking"),
        mode=_build(ModeConfig, _section(data, "mode"), "mode"),
        qos=qos,
        criteria=_criteria(_section(data, "pass_criteria")),
        raw=data,
    )


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return parse_scenario(data, str(path))


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package."""
    path = BUNDLED_DIR / f"{name}.json"
    if not path.is_file():
        known = sorted(p.stem for p in BUNDLED_DIR.glob("*.json"))
        raise FileNotFoundError(f"no bundled scenario {name!r}; available: {known}")
    return path
