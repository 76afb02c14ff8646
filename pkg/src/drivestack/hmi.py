"""Driver-facing status messages and a scripted driver."""
from __future__ import annotations

from dataclasses import dataclass

from .messages import DriveMode, DriverInput, Heartbeat, HmiRequest, ModeStatus
from .msgbus import MessageBus, QosPolicy

__all__ = ["HmiMessage", "DriverModel", "HmiRenderer", "driver_step", "HmiNode"]


@dataclass(frozen=True)
class HmiMessage:
    kind: str  # mode_changed | warning | takeover_request | takeover_cleared
    tick: int
    detail: str = ""
    attributes: tuple[str, ...] = ()


@dataclass(frozen=True)
class DriverModel:
    engage_at_tick: int | None = None
    ack_delay_ticks: int = 60
    responds_to_takeover: bool = True
    disengage_at_tick: int | None = None

    def __post_init__(self):
        if self.ack_delay_ticks < 0:
            raise ValueError("ack_delay_ticks must be non-negative")


def driver_step(model: DriverModel, request_tick: int | None, tick: int, acked: bool = False) -> str | None:
    """Driver input for this tick given the outstanding take-over request, if any."""
    if model.engage_at_tick is not None and tick == model.engage_at_tick:
        return "driver_engage"
    if model.disengage_at_tick is not None and tick == model.disengage_at_tick:
        return "driver_disengage"
    if (
        model.responds_to_takeover
        and request_tick is not None
        and not acked
        and tick >= request_tick + model.ack_delay_ticks
    ):
        return "driver_ack_takeover"
    return None


class HmiRenderer:
    """Turns mode updates and requests into display messages."""

    def __init__(self):
        self.mode: DriveMode | None = None
        self.request_open = False

    def render(self, statuses, requests, tick: int) -> list[HmiMessage]:
        out = []
        for req in requests:
            if req.kind == "takeover_request":
                self.request_open = True
                out.append(HmiMessage("takeover_request", tick, req.detail, tuple(req.attributes)))
            else:
                out.append(HmiMessage("warning", tick, req.detail, tuple(req.attributes)))
        for st in statuses:
            if self.mode is not None and st.mode is not self.mode:
                out.append(HmiMessage("mode_changed", tick, f"{self.mode.value}->{st.mode.value}"))
                if self.request_open and st.mode is DriveMode.MANUAL:
                    out.append(HmiMessage("takeover_cleared", tick, "driver in control"))
                    self.request_open = False
                elif self.request_open and st.mode is DriveMode.EMERGENCY_BRAKE:
                    self.request_open = False
            self.mode = st.mode
        return out


class HmiNode:
    name = "hmi"

    def __init__(self, bus: MessageBus, driver: DriverModel, qos: dict[str, QosPolicy]):
        self.driver = driver
        self.renderer = HmiRenderer()
        self._mode = bus.subscribe("/mode/active", ModeStatus, qos["/mode/active"])
        self._req = bus.subscribe("/hmi/requests", HmiRequest, qos["/hmi/requests"])
        self._driver_pub = bus.advertise("/hmi/driver", DriverInput)
        self._display = bus.advertise("/hmi/display", HmiMessage)
        self._hb = bus.advertise("/health/hmi", Heartbeat)
        self.pending_request: int | None = None
        self.acked = False

    def tick(self, tick: int) -> None:
        statuses = [e.payload for e in self._mode.drain()]
        requests = [e.payload for e in self._req.drain()]
        for msg in self.renderer.render(statuses, requests, tick):
            self._display.publish(msg)
        for req in requests:
            if req.kind == "takeover_request":
                self.pending_request = req.tick
                self.acked = False
        if statuses and statuses[-1].mode is DriveMode.MANUAL:
            self.pending_request = None
        kind = driver_step(self.driver, self.pending_request, tick, self.acked)
        if kind is not None:
            if kind == "driver_ack_takeover":
                self.acked = True
            self._driver_pub.publish(DriverInput(kind, tick))
        self._hb.publish(Heartbeat(self.name, tick))
