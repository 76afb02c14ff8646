import pytest

from drivestack.hmi import DriverModel, HmiMessage, HmiNode, HmiRenderer, driver_step
from drivestack.messages import DriveMode, DriverInput, HmiRequest, ModeStatus
from drivestack.msgbus import MessageBus, QosPolicy

AP, CZA, TOR, MAN, EB = (
    DriveMode.AUTOPILOT, DriveMode.CZA, DriveMode.TAKEOVER_REQUESTED, DriveMode.MANUAL, DriveMode.EMERGENCY_BRAKE,
)


def status(tick, mode, prev=None):
    return ModeStatus(tick, mode, prev or mode, prev is not None and prev is not mode)


def test_driver_examples():
    m = DriverModel(engage_at_tick=50)
    assert [t for t in range(200) if driver_step(m, None, t) == "driver_engage"] == [50]
    m = DriverModel(ack_delay_ticks=60)
    acks = [t for t in range(300) if driver_step(m, 100, t, acked=t > 160) == "driver_ack_takeover"]
    assert acks[0] == 160
    m = DriverModel(responds_to_takeover=False)
    assert all(driver_step(m, 100, t) is None for t in range(1000))
    assert driver_step(DriverModel(disengage_at_tick=7), None, 7) == "driver_disengage"
    with pytest.raises(ValueError):
        DriverModel(ack_delay_ticks=-1)


def test_driver_is_pure():
    m = DriverModel(engage_at_tick=3, ack_delay_ticks=5)
    a = [driver_step(m, 10, t) for t in range(30)]
    b = [driver_step(m, 10, t) for t in range(30)]
    assert a == b


def test_render_examples():
    r = HmiRenderer()
    assert r.render([status(0, AP)], [], 0) == []
    out = r.render([status(1, CZA, AP)], [], 1)
    assert out == [HmiMessage("mode_changed", 1, "AUTOPILOT->CZA")]
    assert r.render([], [], 2) == []
    assert r.render([status(3, CZA)], [], 3) == []
    out = r.render([status(4, TOR, CZA)], [HmiRequest("takeover_request", 4, ("weather",), "from CZA")], 4)
    assert [m.kind for m in out] == ["takeover_request", "mode_changed"]
    assert out[0].attributes == ("weather",)
    out = r.render([status(5, MAN, TOR)], [], 5)
    assert [m.kind for m in out] == ["mode_changed", "takeover_cleared"]


def test_render_request_closed_by_emergency_brake():
    r = HmiRenderer()
    r.render([status(0, TOR)], [HmiRequest("takeover_request", 0)], 0)
    out = r.render([status(1, EB, TOR)], [HmiRequest("warning", 1, ("takeover_timeout",), "emergency braking")], 1)
    assert [m.kind for m in out] == ["warning", "mode_changed"]
    assert not r.request_open
    out = r.render([status(2, MAN, EB)], [], 2)
    assert [m.kind for m in out] == ["mode_changed"]


def test_node_acks_after_delay():
    bus = MessageBus()
    q = QosPolicy(8)
    node = HmiNode(bus, DriverModel(ack_delay_ticks=60), {"/mode/active": q, "/hmi/requests": q})
    req = bus.advertise("/hmi/requests", HmiRequest)
    mode = bus.advertise("/mode/active", ModeStatus)
    driver = bus.subscribe("/hmi/driver", DriverInput, QosPolicy(8))
    display = bus.subscribe("/hmi/display", HmiMessage, QosPolicy(8))
    inputs = []
    for tick in range(200):
        bus.tick = tick
        node.tick(tick)
        if tick == 100:
            mode.publish(status(100, TOR, AP))
            req.publish(HmiRequest("takeover_request", 100, ("weather",)))
        inputs += [(e.payload.kind, e.payload.tick) for e in driver.drain()]
        if inputs and tick == inputs[0][1] + 1:
            mode.publish(status(tick, MAN, TOR))
    assert inputs == [("driver_ack_takeover", 160)]
    kinds = [e.payload.kind for e in display.drain()]
    assert kinds.count("takeover_request") == 1 and kinds.count("takeover_cleared") == 1
