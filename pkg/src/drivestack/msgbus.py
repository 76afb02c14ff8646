"""In-process typed publish/subscribe bus with request/response services.

Delivery is deterministic: a message published during tick ``t`` becomes
visible to subscribers from tick ``t + 1`` onwards, and drained envelopes are
ordered by ``(publish_tick, publisher registration order, sequence)``.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

__all__ = [
    "BusError",
    "InvalidName",
    "TypeConflict",
    "BusClosed",
    "UnknownService",
    "DuplicateService",
    "QosPolicy",
    "Envelope",
    "Publisher",
    "Subscriber",
    "MessageBus",
]

_TOPIC_RE = re.compile(r"^(/[A-Za-z0-9_]+)+$")
_SERVICE_RE = re.compile(r"^[A-Za-z0-9_]+(/[A-Za-z0-9_]+)*$")


class BusError(Exception):
    pass


class InvalidName(BusError):
    pass


class TypeConflict(BusError):
    pass


class BusClosed(BusError):
    pass


class UnknownService(BusError):
    pass


class DuplicateService(BusError):
    pass


@dataclass(frozen=True)
class QosPolicy:
    """Keep-last-N queue policy.

    ``best_effort`` is accepted but behaves exactly like ``reliable``.
    """

    depth: int = 1
    reliability: str = "reliable"

    def __post_init__(self):
        if not isinstance(self.depth, int) or self.depth < 1:
            raise ValueError(f"QoS depth must be a positive integer, got {self.depth!r}")
        if self.reliability not in ("reliable", "best_effort"):
            raise ValueError(f"unknown reliability {self.reliability!r}")


@dataclass(frozen=True)
class Envelope:
    topic: str
    publish_tick: int
    sequence: int
    publisher: int  # registration index of the publishing handle
    payload: Any


class _Topic:
    __slots__ = ("name", "msg_type", "index", "subscribers", "published")

    def __init__(self, name: str, msg_type: type, index: int):
        self.name = name
        self.msg_type = msg_type
        self.index = index
        self.subscribers: list[Subscriber] = []
        self.published = 0


class Publisher:
    __slots__ = ("_bus", "_topic", "index", "_seq")

    def __init__(self, bus: MessageBus, topic: _Topic, index: int):
        self._bus = bus
        self._topic = topic
        self.index = index
        self._seq = 0

    @property
    def topic(self) -> str:
        return self._topic.name

    def publish(self, payload) -> None:
        self._bus.publish(self, payload)


class Subscriber:
    __slots__ = ("_bus", "_topic", "qos", "_queue", "received")

    def __init__(self, bus: MessageBus, topic: _Topic, qos: QosPolicy):
        self._bus = bus
        self._topic = topic
        self.qos = qos
        self._queue: deque[Envelope] = deque(maxlen=qos.depth)
        self.received = 0

    @property
    def topic(self) -> str:
        return self._topic.name

    def drain(self) -> list[Envelope]:
        return self._bus.drain(self)


class MessageBus:
    """Single-threaded bus owned by a tick scheduler.

    The scheduler advances :attr:`tick`; nodes publish and drain from inside
    their slot of the current tick.
    """

    def __init__(self):
        self.tick = 0
        self._topics: dict[str, _Topic] = {}
        self._publishers: list[Publisher] = []
        self._services: dict[str, Callable[[Any], Any]] = {}
        self._closed = False

    # topics -------------------------------------------------------------

    def _topic(self, name: str, msg_type: type) -> _Topic:
        if not isinstance(name, str) or not _TOPIC_RE.match(name):
            raise InvalidName(f"invalid topic name {name!r}")
        if not isinstance(msg_type, type):
            raise TypeError("msg_type must be a type")
        topic = self._topics.get(name)
        if topic is None:
            topic = _Topic(name, msg_type, len(self._topics))
            self._topics[name] = topic
        elif topic.msg_type is not msg_type:
            raise TypeConflict(
                f"topic {name!r} carries {topic.msg_type.__name__}, not {msg_type.__name__}"
            )
        return topic

    def advertise(self, name: str, msg_type: type, qos: QosPolicy | None = None) -> Publisher:
        if self._closed:
            raise BusClosed("bus is closed")
        topic = self._topic(name, msg_type)
        pub = Publisher(self, topic, len(self._publishers))
        self._publishers.append(pub)
        return pub

    def subscribe(self, name: str, msg_type: type, qos: QosPolicy | None = None) -> Subscriber:
        if self._closed:
            raise BusClosed("bus is closed")
        topic = self._topic(name, msg_type)
        sub = Subscriber(self, topic, qos or QosPolicy())
        topic.subscribers.append(sub)
        return sub

    def topics(self) -> list[tuple[str, type]]:
        """Registered topics in registration order."""
        return [(t.name, t.msg_type) for t in self._topics.values()]

    def publish_count(self, name: str) -> int:
        return self._topics[name].published

    def publish(self, handle: Publisher, payload) -> None:
        if self._closed:
            raise BusClosed("bus is closed")
        topic = handle._topic
        if not isinstance(payload, topic.msg_type):
            raise TypeConflict(
                f"topic {topic.name!r} expects {topic.msg_type.__name__}, "
                f"got {type(payload).__name__}"
            )
        handle._seq += 1
        env = Envelope(topic.name, self.tick, handle._seq, handle.index, payload)
        topic.published += 1
        for sub in topic.subscribers:
            sub._queue.append(env)

    def drain(self, handle: Subscriber) -> list[Envelope]:
        queue = handle._queue
        if not queue:
            return []
        now = self.tick
        ready = [e for e in queue if e.publish_tick < now]
        if not ready:
            return []
        if len(ready) == len(queue):
            queue.clear()
        else:
            pending = [e for e in queue if e.publish_tick >= now]
            queue.clear()
            queue.extend(pending)
        ready.sort(key=lambda e: (e.publish_tick, e.publisher, e.sequence))
        handle.received += len(ready)
        return ready

    # services -----------------------------------------------------------

    def register_service(self, name: str, handler: Callable[[Any], Any]) -> None:
        if not isinstance(name, str) or not _SERVICE_RE.match(name.strip("/")):
            raise InvalidName(f"invalid service name {name!r}")
        if name in self._services:
            raise DuplicateService(name)
        self._services[name] = handler

    def call_service(self, name: str, request=None):
        if self._closed:
            raise BusClosed("bus is closed")
        try:
            handler = self._services[name]
        except KeyError:
            raise UnknownService(name) from None
        return handler(request)

    def close(self) -> None:
        self._closed = True
