"""Pass/fail evaluation of a recorded trace. Pure: depends only on (records, criteria)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..messages import DriveMode
from ..worldsim import NO_OBSTACLE
from .spec import PassCriteria

__all__ = ["Failure", "Verdict", "TraceView", "evaluate", "read_trace", "mode_timeline"]


@dataclass(frozen=True)
class Failure:
    criterion: str
    tick: int | None
    detail: str = ""


@dataclass
class Verdict:
    passed: bool
    failures: list[Failure] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def failed(self, criterion: str) -> Failure | None:
        return next((f for f in self.failures if f.criterion == criterion), None)

    def summary(self) -> str:
        lines = [f"verdict: {'PASS' if self.passed else 'FAIL'}"]
        for f in self.failures:
            lines.append(f"  failed {f.criterion} at tick {f.tick}: {f.detail}")
        m = self.metrics
        if m:
            if m["min_clearance"] is not None:
                lines.append(f"  min clearance: {m['min_clearance']:.3f} m")
            lines.append(f"  max |d|: {m['max_abs_d']:.3f} m")
            lines.append(f"  final s: {m['final_s']:.2f} m, final v: {m['final_v']:.2f} m/s")
            timeline = ", ".join(f"{mode}@{tick}" for tick, mode in m["mode_timeline"])
            lines.append(f"  modes: {timeline}")
        return "\n".join(lines)


def read_trace(path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class TraceView:
    """Per-topic access to trace records."""

    def __init__(self, records):
        self.records = list(records)
        self._by_topic: dict[str, list[dict]] = {}
        for r in self.records:
            self._by_topic.setdefault(r["topic"], []).append(r)

    def topic(self, name: str) -> list[dict]:
        return self._by_topic.get(name, [])

    def metrics(self) -> list[dict]:
        return [r["payload"] for r in self.topic("/world/metrics")]


def mode_timeline(records) -> list[tuple[int, str]]:
    """(tick, mode) at every mode change, starting with the first published mode."""
    out: list[tuple[int, str]] = []
    for r in TraceView(records).topic("/mode/active"):
        mode = r["payload"]["mode"]
        if not out or out[-1][1] != mode:
            out.append((r["tick"], mode))
    return out


def _zone_extents(view: TraceView) -> list[tuple[float, float]]:
    # the extent of one zone only grows, so keep the widest per entry episode
    zones: list[list[float]] = []
    active = False
    for r in view.topic("/perception/cz_event"):
        p = r["payload"]
        if p["status"] == "entered_detection":
            if not active:
                zones.append([p["s_start"], p["s_end"]])
                active = True
            else:
                zones[-1][0] = min(zones[-1][0], p["s_start"])
                zones[-1][1] = max(zones[-1][1], p["s_end"])
        elif p["status"] == "cleared":
            active = False
    return [(a, b) for a, b in zones]


def _is_subsequence(needle, hay) -> bool:
    it = iter(hay)
    return all(any(x == y for y in it) for x in needle)


def evaluate(records, criteria: PassCriteria) -> Verdict:
    view = TraceView(records)
    metrics = view.metrics()
    failures: list[Failure] = []
    timeline = mode_timeline(view.records)

    if criteria.require_no_collision:
        hit = next((m for m in metrics if m["collision"]), None)
        if hit is not None:
            failures.append(Failure("no_collision", hit["tick"], f"collision with {hit['nearest_obstacle']}"))

    if criteria.require_route_completion_s is not None:
        final_s = metrics[-1]["s"] if metrics else float("-inf")
        if final_s < criteria.require_route_completion_s:
            tick = metrics[-1]["tick"] if metrics else None
            failures.append(Failure(
                "route_completion", tick,
                f"final s {final_s:.2f} < {criteria.require_route_completion_s}",
            ))

    if criteria.min_obstacle_clearance is not None:
        bad = next((m for m in metrics if m["min_clearance"] < criteria.min_obstacle_clearance), None)
        if bad is not None:
            failures.append(Failure(
                "min_obstacle_clearance", bad["tick"],
                f"clearance {bad['min_clearance']:.3f} m to {bad['nearest_obstacle']}",
            ))

    if criteria.max_speed_in_zone is not None:
        zones = _zone_extents(view)
        limit = criteria.max_speed_in_zone
        bad = next(
            (m for m in metrics if m["v"] > limit and any(a <= m["s"] <= b for a, b in zones)),
            None,
        )
        if bad is not None:
            failures.append(Failure("max_speed_in_zone", bad["tick"], f"v {bad['v']:.3f} > {limit}"))

    if criteria.required_mode_sequence:
        want = [DriveMode(m).value for m in criteria.required_mode_sequence]
        seen = [mode for _, mode in timeline]
        if not _is_subsequence(want, seen):
            last = metrics[-1]["tick"] if metrics else None
            failures.append(Failure("mode_sequence", last, f"wanted {want}, saw {seen}"))

    lat = criteria.max_final_lateral_offset
    if lat is not None:
        bad = next((m for m in metrics if m["s"] >= lat.s_from and abs(m["d"]) > lat.max_abs_d), None)
        if bad is not None:
            failures.append(Failure(
                "max_final_lateral_offset", bad["tick"], f"|d| {abs(bad['d']):.3f} at s {bad['s']:.1f}",
            ))

    before = criteria.mode_entered_before_s
    if before is not None:
        want = DriveMode(before.mode).value
        entry = next((t for t, mode in timeline if mode == want), None)
        if entry is None:
            failures.append(Failure("mode_entered_before_s", None, f"{want} never entered"))
        else:
            s_at = next((m["s"] for m in metrics if m["tick"] >= entry), None)
            if s_at is None or s_at >= before.s:
                failures.append(Failure("mode_entered_before_s", entry, f"{want} entered at s {s_at}"))

    if criteria.require_stop:
        if not metrics or metrics[-1]["v"] > 0.05:
            tick = metrics[-1]["tick"] if metrics else None
            failures.append(Failure("require_stop", tick, "vehicle did not come to a stop"))

    clearance = min((m["min_clearance"] for m in metrics), default=NO_OBSTACLE)
    summary = {
        "ticks": len(metrics),
        # None when the scene never had an obstacle
        "min_clearance": clearance if clearance < NO_OBSTACLE else None,
        "max_abs_d": max((abs(m["d"]) for m in metrics), default=0.0),
        "final_s": metrics[-1]["s"] if metrics else 0.0,
        "final_v": metrics[-1]["v"] if metrics else 0.0,
        "mode_timeline": timeline,
    }
    return Verdict(not failures, failures, summary)
