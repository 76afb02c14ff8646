"""Bus payload types shared between layers, plus trace serialization."""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np


class DriveMode(str, enum.Enum):
    MANUAL = "MANUAL"
    AUTOPILOT = "AUTOPILOT"
    CZA = "CZA"
    TAKEOVER_REQUESTED = "TAKEOVER_REQUESTED"
    EMERGENCY_BRAKE = "EMERGENCY_BRAKE"


# modes in which the automation is driving the vehicle
AUTOMATED_MODES = frozenset(
    {DriveMode.AUTOPILOT, DriveMode.CZA, DriveMode.TAKEOVER_REQUESTED}
)


@dataclass(frozen=True)
class ControlCommand:
    a_cmd: float
    delta_cmd: float
    source: str = "controller"  # or "emergency_override"
    tick: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.a_cmd) and math.isfinite(self.delta_cmd)):
            raise ValueError("control command values must be finite")
        if self.source not in ("controller", "emergency_override"):
            raise ValueError(f"unknown command source {self.source!r}")


@dataclass(frozen=True)
class Heartbeat:
    node: str
    tick: int


@dataclass(frozen=True)
class ModeStatus:
    tick: int
    mode: DriveMode
    previous: DriveMode
    changed: bool
    cause: str = ""


@dataclass(frozen=True)
class HmiRequest:
    kind: str  # takeover_request | warning
    tick: int
    attributes: tuple[str, ...] = ()
    detail: str = ""


@dataclass(frozen=True)
class DriverInput:
    kind: str  # driver_engage | driver_disengage | driver_ack_takeover
    tick: int


@dataclass(frozen=True)
class PlannerStatus:
    tick: int
    ok: bool
    planner_id: str
    detail: str = ""


@dataclass(frozen=True)
class ControlStatus:
    tick: int
    ok: bool
    detail: str = ""


# -- trace serialization -----------------------------------------------------

_FIELDS: dict[type, tuple[str, ...]] = {}


def to_record(obj: Any) -> Any:
    """Convert a payload into JSON-compatible builtins, recursively."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if obj is None or isinstance(obj, (bool, int, str, float)):
        return obj
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (list, tuple)):
        return [to_record(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(to_record(v) for v in obj)
    if isinstance(obj, dict):
        return {str(k): to_record(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    cls = type(obj)
    names = _FIELDS.get(cls)
    if names is None:
        if not dataclasses.is_dataclass(obj):
            raise TypeError(f"cannot serialize {cls.__name__}")
        names = tuple(f.name for f in dataclasses.fields(obj))
        _FIELDS[cls] = names
    return {n: to_record(getattr(obj, n)) for n in names}
