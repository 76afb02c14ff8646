import random
from dataclasses import dataclass

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestack.msgbus import (
    BusClosed,
    DuplicateService,
    InvalidName,
    MessageBus,
    QosPolicy,
    TypeConflict,
    UnknownService,
)


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Text:
    value: str


def values(envs):
    return [e.payload.value for e in envs]


def test_one_tick_latency():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=10))
    pub.publish(Num(1))
    assert sub.drain() == []
    bus.tick = 1
    envs = sub.drain()
    assert values(envs) == [1]
    assert envs[0].publish_tick == 0
    assert sub.drain() == []


def test_fifo_within_publisher():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=100))
    for i in range(20):
        pub.publish(Num(i))
    bus.tick = 1
    assert values(sub.drain()) == list(range(20))


def test_keep_last_n_evicts_oldest():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=3))
    for i in range(5):
        pub.publish(Num(i))
    bus.tick = 1
    assert values(sub.drain()) == [2, 3, 4]


def test_fan_out_each_subscriber_gets_a_copy():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    subs = [bus.subscribe("/a", Num, QosPolicy(depth=4)) for _ in range(3)]
    pub.publish(Num(7))
    bus.tick = 1
    for s in subs:
        assert values(s.drain()) == [7]


def test_registration_order_breaks_ties_within_a_tick():
    bus = MessageBus()
    first = bus.advertise("/a", Num)
    second = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=10))
    second.publish(Num(20))
    first.publish(Num(10))
    second.publish(Num(21))
    bus.tick = 1
    assert values(sub.drain()) == [10, 20, 21]


def test_earlier_tick_sorts_first_regardless_of_publisher():
    bus = MessageBus()
    first = bus.advertise("/a", Num)
    second = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=10))
    second.publish(Num(1))
    bus.tick = 1
    first.publish(Num(2))
    bus.tick = 2
    assert values(sub.drain()) == [1, 2]


def test_messages_from_current_tick_stay_queued():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    sub = bus.subscribe("/a", Num, QosPolicy(depth=10))
    pub.publish(Num(0))
    bus.tick = 1
    pub.publish(Num(1))
    assert values(sub.drain()) == [0]
    bus.tick = 2
    assert values(sub.drain()) == [1]


def test_type_conflicts():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    with pytest.raises(TypeConflict):
        bus.subscribe("/a", Text)
    with pytest.raises(TypeConflict):
        bus.advertise("/a", Text)
    with pytest.raises(TypeConflict):
        pub.publish(Text("x"))


@pytest.mark.parametrize("name", ["", "a", "/", "/a/", "//a", "/a b", "/a-b", 3])
def test_invalid_topic_names(name):
    with pytest.raises(InvalidName):
        MessageBus().advertise(name, Num)


def test_qos_depth_must_be_positive():
    with pytest.raises(ValueError):
        QosPolicy(depth=0)


def test_closed_bus_rejects_everything():
    bus = MessageBus()
    pub = bus.advertise("/a", Num)
    bus.close()
    with pytest.raises(BusClosed):
        pub.publish(Num(1))
    with pytest.raises(BusClosed):
        bus.subscribe("/b", Num)
    with pytest.raises(BusClosed):
        bus.call_service("x")


def test_services_are_synchronous():
    bus = MessageBus()
    bus.register_service("echo", lambda r: ("ok", r))
    assert bus.call_service("echo", 5) == ("ok", 5)
    with pytest.raises(DuplicateService):
        bus.register_service("echo", lambda r: r)
    with pytest.raises(UnknownService):
        bus.call_service("missing")


def test_publish_counts_and_topic_order():
    bus = MessageBus()
    a = bus.advertise("/a", Num)
    bus.subscribe("/b", Num)
    for i in range(4):
        a.publish(Num(i))
    assert [n for n, _ in bus.topics()] == ["/a", "/b"]
    assert bus.publish_count("/a") == 4
    assert bus.publish_count("/b") == 0


@settings(max_examples=200, deadline=None)
@given(
    depth=st.integers(1, 8),
    script=st.lists(st.lists(st.integers(0, 2), max_size=6), min_size=1, max_size=12),
)
def test_property_drain_matches_reference_model(depth, script):
    """Each tick, publishers 0..2 publish in the scripted order; compare to a simple model."""
    bus = MessageBus()
    pubs = [bus.advertise("/t", Num) for _ in range(3)]
    sub = bus.subscribe("/t", Num, QosPolicy(depth=depth))
    queue = []  # (tick, publisher, seq, value)
    seqs = [0, 0, 0]
    counter = 0
    for tick, order in enumerate(script):
        bus.tick = tick
        ready = sorted(q for q in queue if q[0] < tick)
        queue = [q for q in queue if q[0] >= tick]
        assert values(sub.drain()) == [q[3] for q in ready]
        for p in order:
            seqs[p] += 1
            counter += 1
            pubs[p].publish(Num(counter))
            queue.append((tick, p, seqs[p], counter))
            queue = queue[-depth:]


def test_fuzz_1e5_messages_preserve_per_publisher_order():
    rng = random.Random(1234)
    bus = MessageBus()
    n_pub = 7
    pubs = [bus.advertise(f"/t{i % 3}", Num) for i in range(n_pub)]
    subs = [bus.subscribe(f"/t{i}", Num, QosPolicy(depth=1 << 20)) for i in range(3)]
    sent = 0
    tick = 0
    next_value = [0] * n_pub
    while sent < 100_000:
        bus.tick = tick
        for _ in range(rng.randint(0, 60)):
            p = rng.randrange(n_pub)
            # value encodes (publisher, per-publisher counter)
            pubs[p].publish(Num(p * 10**6 + next_value[p]))
            next_value[p] += 1
            sent += 1
        tick += 1
    bus.tick = tick
    seen = [0] * n_pub
    total = 0
    for s in subs:
        envs = s.drain()
        keys = [(e.publish_tick, e.publisher, e.sequence) for e in envs]
        assert keys == sorted(keys)
        for e in envs:
            p, k = divmod(e.payload.value, 10**6)
            assert k == seen[p]
            seen[p] += 1
        total += len(envs)
    assert total == sent == sum(next_value)
    assert seen == next_value
