import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestack.messages import DriveMode
from drivestack.msgbus import MessageBus, QosPolicy
from drivestack.odd import ATTRIBUTES, OddDefinition, OddNode, OddStatusList, evaluate, publish_status
from drivestack.perception import ConstructionZoneEvent
from drivestack.worldsim import WEATHER_LEVELS, Environment, VehicleState, WorldTruth

from conftest import straight_map

MAP = straight_map()
AP = OddDefinition(DriveMode.AUTOPILOT)
CZA = OddDefinition(DriveMode.CZA, construction_zone_permitted=True, speed_range=(0.0, 20.0))


def car(v):
    return VehicleState(10.0, 0.0, 0.0, v)


def test_examples():
    st_ = evaluate(AP, Environment("clear", 1000.0), MAP, car(20.0), False)
    assert st_.satisfied and st_.violated_attributes == ()
    st_ = evaluate(AP, Environment("rain_heavy", 30.0), MAP, car(20.0), False)
    assert set(st_.violated_attributes) == {"weather", "visibility"} and not st_.satisfied
    st_ = evaluate(AP, Environment(), MAP, car(20.0), True)
    assert st_.violated_attributes == ("construction_zone",)
    assert evaluate(CZA, Environment(), MAP, car(15.0), True).satisfied


def test_all_attributes_reported_together():
    urban = type(MAP)(MAP.reference_line, road_type="urban")
    st_ = evaluate(AP, Environment("rain_heavy", 10.0), urban, car(40.0), True)
    assert set(st_.violated_attributes) == set(ATTRIBUTES)


def test_definition_validation():
    with pytest.raises(ValueError):
        OddDefinition(DriveMode.AUTOPILOT, allowed_weather=())
    with pytest.raises(ValueError):
        OddDefinition(DriveMode.AUTOPILOT, speed_range=(10, 5))


definitions = st.builds(
    OddDefinition,
    mode=st.just(DriveMode.AUTOPILOT),
    allowed_road_types=st.frozensets(st.sampled_from(["highway", "urban"]), min_size=1),
    allowed_weather=st.frozensets(st.sampled_from(WEATHER_LEVELS), min_size=1),
    min_visibility=st.floats(0, 500),
    speed_range=st.tuples(st.floats(0, 20), st.floats(0, 20)).map(lambda t: (t[0], t[0] + t[1])),
    construction_zone_permitted=st.booleans(),
)
inputs = st.tuples(
    st.sampled_from(["highway", "urban"]),
    st.sampled_from(WEATHER_LEVELS),
    st.floats(1, 1000),
    st.floats(0, 45),
    st.booleans(),
)


def independent(defn, road, weather, vis, v, cz):
    failed = set()
    if road not in defn.allowed_road_types:
        failed.add("road_type")
    if weather not in defn.allowed_weather:
        failed.add("weather")
    if vis < defn.min_visibility:
        failed.add("visibility")
    if v < defn.speed_range[0] or v > defn.speed_range[1]:
        failed.add("speed")
    if cz and not defn.construction_zone_permitted:
        failed.add("construction_zone")
    return failed


@settings(max_examples=400, deadline=None)
@given(definitions, inputs)
def test_violations_match_independent_rules(defn, inp):
    road, weather, vis, v, cz = inp
    m = type(MAP)(MAP.reference_line, road_type=road)
    st_ = evaluate(defn, Environment(weather, vis), m, car(v), cz)
    assert set(st_.violated_attributes) == independent(defn, road, weather, vis, v, cz)
    assert st_.satisfied == (not st_.violated_attributes)


@settings(max_examples=400, deadline=None)
@given(definitions, inputs, st.floats(0, 100), st.floats(0, 10))
def test_relaxing_never_breaks_satisfaction(defn, inp, vis_drop, widen):
    road, weather, vis, v, cz = inp
    m = type(MAP)(MAP.reference_line, road_type=road)
    env = Environment(weather, vis)
    relaxed = OddDefinition(
        defn.mode,
        defn.allowed_road_types | {"urban"},
        defn.allowed_weather | {"rain_light"},
        max(0.0, defn.min_visibility - vis_drop),
        (max(0.0, defn.speed_range[0] - widen), defn.speed_range[1] + widen),
        defn.construction_zone_permitted or widen > 5,
    )
    before = evaluate(defn, env, m, car(v), cz)
    after = evaluate(relaxed, env, m, car(v), cz)
    assert set(after.violated_attributes) <= set(before.violated_attributes)


def test_publish_status_covers_every_definition():
    out = publish_status([AP, CZA], Environment(), MAP, car(15.0), True, tick=7)
    assert [s.mode for s in out] == [DriveMode.AUTOPILOT, DriveMode.CZA]
    assert [s.satisfied for s in out] == [False, True]
    assert all(s.tick == 7 for s in out)


def test_node_tracks_zone_events():
    bus = MessageBus()
    q = QosPolicy(4)
    node = OddNode(bus, MAP, [AP, CZA], {"/world/truth": q, "/ego/state": q, "/perception/cz_event": q})
    truth = bus.advertise("/world/truth", WorldTruth)
    ego = bus.advertise("/ego/state", VehicleState)
    cz = bus.advertise("/perception/cz_event", ConstructionZoneEvent)
    out = bus.subscribe("/odd/status", OddStatusList, QosPolicy(8))
    truth.publish(WorldTruth(0, car(15.0), (), Environment()))
    ego.publish(car(15.0))
    cz.publish(ConstructionZoneEvent("entered_detection", 100.0, 200.0, 5, 0))
    bus.tick = 1
    node.tick(1)
    cz.publish(ConstructionZoneEvent("cleared", 100.0, 200.0, 5, 1))
    bus.tick = 2
    node.tick(2)
    bus.tick = 3
    lists = [e.payload for e in out.drain()]
    assert [lst.statuses[0].satisfied for lst in lists] == [False, True]
