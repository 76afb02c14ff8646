import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestack.messages import ControlCommand
from drivestack.msgbus import Envelope
from drivestack.worldsim import (
    Environment,
    Obstacle,
    VehicleParams,
    VehicleState,
    World,
    WorldNode,
    apply_command,
    footprint_clearance,
    step,
)

from conftest import straight_map


def cmd(a=0.0, delta=0.0, source="controller"):
    return ControlCommand(a, delta, source, 0)


def test_apply_command_examples():
    p = VehicleParams()
    assert apply_command(VehicleState(0, 0, 0, 0), p, cmd(), 0.02) == (0.0, 0.0)
    fast = VehicleParams(steer_rate_max=100.0)
    assert apply_command(VehicleState(0, 0, 0, 0), fast, cmd(delta=1.0), 0.02)[1] == 0.6
    slow = VehicleParams(steer_rate_max=0.5)
    assert apply_command(VehicleState(0, 0, 0, 0), slow, cmd(delta=0.6), 0.02)[1] == pytest.approx(0.01)
    # acceleration clamp then jerk limit
    a, _ = apply_command(VehicleState(0, 0, 0, 5, a=2.9), p, cmd(a=50.0), 0.02)
    assert a == p.a_max
    a, _ = apply_command(VehicleState(0, 0, 0, 5, a=0.0), p, cmd(a=-50.0), 0.02)
    assert a == pytest.approx(-p.accel_rate_max * 0.02)
    with pytest.raises(ValueError):
        apply_command(VehicleState(0, 0, 0, 0), p, cmd(), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-0.6, 0.6), st.floats(-0.19, 0.19), st.floats(-0.013, 0.013))
def test_apply_command_idempotent_when_feasible(a_prev, d_prev, da, dd):
    p = VehicleParams()
    a = min(max(a_prev + da, p.a_min), p.a_max)
    d = min(max(d_prev + dd, -p.delta_max), p.delta_max)
    state = VehicleState(0, 0, 0, 5.0, a=a_prev, delta=d_prev)
    assert apply_command(state, p, cmd(a, d), 0.02) == (a, d)


def test_step_examples():
    p = VehicleParams()
    s = step(VehicleState(0, 0, 0, 10.0), p, 0.0, 0.0, 0.1)
    assert (s.x, s.y, s.psi, s.v) == pytest.approx((1.0, 0.0, 0.0, 10.0))
    s0 = VehicleState(3.0, 4.0, 0.5, 0.0)
    s = step(s0, p, 0.0, 0.3, 0.02)
    assert (s.x, s.y, s.psi, s.v) == (3.0, 4.0, 0.5, 0.0) and s.t == 0.02
    s = step(VehicleState(0, 0, 0, 10.0), VehicleParams(wheelbase=2.9), 0.0, 0.1, 0.02)
    # frozen from an independent evaluation of 10 * tan(0.1) / 2.9 * 0.02
    assert s.psi == pytest.approx(0.0069196326, abs=1e-10)
    with pytest.raises(ValueError):
        step(s0, p, 0, 0, -1)


def test_straight_line_is_exact():
    p = VehicleParams()
    s = VehicleState(0, 0, 0, 12.0)
    for _ in range(1000):
        s = step(s, p, 0.0, 0.0, 0.02)
    assert s.y == 0.0 and s.psi == 0.0
    assert s.x == pytest.approx(12.0 * 20.0)
    assert s.t == 1000 * 0.02 and s.tick == 1000


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.3, -0.2])
def test_constant_steer_circle_radius(delta):
    p = VehicleParams()
    v, dt = 10.0, 0.02
    radius = p.wheelbase / math.tan(abs(delta))
    n = int(math.ceil(2 * math.pi * radius / v / dt))
    s = VehicleState(0, 0, 0, v)
    xs, ys = [], []
    for _ in range(n):
        s = step(s, p, 0.0, delta, dt)
        xs.append(s.x)
        ys.append(s.y)
    # least-squares circle fit
    x, y = np.array(xs), np.array(ys)
    A = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    cx, cy, c = np.linalg.lstsq(A, x * x + y * y, rcond=None)[0]
    r_fit = math.sqrt(c + cx * cx + cy * cy)
    assert abs(r_fit - radius) / radius < 0.01
    assert np.abs(np.hypot(x - cx, y - cy) - radius).max() / radius < 0.01


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-8, 3), st.floats(-0.6, 0.6)), min_size=1, max_size=300), st.floats(0, 30))
def test_speed_non_negative_and_heading_wrapped(inputs, v0):
    p = VehicleParams()
    s = VehicleState(0, 0, 3.1, v0)
    for a, d in inputs:
        s = step(s, p, a, d, 0.02)
        assert s.v >= 0.0
        assert -math.pi < s.psi <= math.pi


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(wheelbase=0)
    with pytest.raises(ValueError):
        VehicleParams(footprint_circles=())
    with pytest.raises(ValueError):
        Obstacle("c", "cone", 0, 0, 0.0)
    with pytest.raises(ValueError):
        Environment(visibility=0)
    with pytest.raises(ValueError):
        Environment(weather="snow")


def test_world_time_and_environment_timeline():
    m = straight_map()
    env = ((0.0, Environment()), (1.0, Environment("rain_heavy", 30.0)))
    w = World(m, VehicleParams(), VehicleState(5, 0, 0, 10), environment_timeline=env)
    for _ in range(49):
        w.advance(cmd())
    assert w.ground_truth().environment.weather == "clear"
    w.advance(cmd())
    assert w.state.t == 50 * 0.02
    assert w.ground_truth().environment.weather == "rain_heavy"


def test_clearance_and_collision_flag():
    p = VehicleParams()
    st_ = VehicleState(0, 0, 0, 0)
    gap, oid = footprint_clearance(st_, p, [Obstacle("c1", "cone", 6.0, 0.0, 0.5)])
    assert oid == "c1" and gap == pytest.approx(6.0 - 2.6 - 1.15 - 0.5)
    w = World(straight_map(), p, VehicleState(5, 0, 0, 0), [Obstacle("c", "cone", 7.0, 0.5, 0.3)])
    assert w.metrics().collision


def test_override_preempts_controller_command():
    envs = [
        Envelope("/control/cmd", 0, 1, 0, cmd(1.0)),
        Envelope("/control/cmd", 0, 1, 1, cmd(-8.0, 0.0, "emergency_override")),
        Envelope("/control/cmd", 0, 2, 0, cmd(2.0)),
    ]
    assert WorldNode.select_command(envs).source == "emergency_override"
    assert WorldNode.select_command(envs[::2]).a_cmd == 2.0
    assert WorldNode.select_command([]) is None
