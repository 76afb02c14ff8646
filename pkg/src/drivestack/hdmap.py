"""Polyline-corridor road map with Cartesian/Frenet conversion.

The reference line is the centerline of the ego's initial lane. Frenet ``s`` is
arc length along it and ``d`` the signed lateral offset, positive to the left
of the direction of travel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core

__all__ = [
    "MapError",
    "DegenerateMap",
    "OutOfCorridor",
    "OutOfRange",
    "FrenetPoint",
    "ReferenceLine",
    "MapModel",
    "cartesian_to_frenet",
    "frenet_to_cartesian",
    "corridor_bounds",
]

# slack for s at the ends of the reference line
_S_EPS = 1e-9


class MapError(Exception):
    pass


class DegenerateMap(MapError):
    pass


class OutOfCorridor(MapError):
    pass


class OutOfRange(MapError):
    pass


@dataclass(frozen=True)
class FrenetPoint:
    s: float
    d: float
    s_dot: float = 0.0
    s_ddot: float = 0.0
    d_dot: float = 0.0
    d_ddot: float = 0.0


class ReferenceLine:
    """Arc-length parametrized polyline."""

    def __init__(self, waypoints):
        pts = np.asarray(waypoints, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise DegenerateMap("reference line needs at least 2 two-dimensional waypoints")
        if not np.all(np.isfinite(pts)):
            raise DegenerateMap("waypoints must be finite")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0.0):
            raise DegenerateMap("consecutive waypoints must be distinct")
        self.x = np.ascontiguousarray(pts[:, 0])
        self.y = np.ascontiguousarray(pts[:, 1])
        self.cumulative_s = np.concatenate(([0.0], np.cumsum(seg_len)))
        self.seg_len = seg_len
        self.seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
        self._tx = seg[:, 0] / seg_len
        self._ty = seg[:, 1] / seg_len
        self.vertex_kappa = self._vertex_curvature()

    @classmethod
    def resampled(cls, waypoints, step: float = 1.0) -> ReferenceLine:
        """Resample a polyline at uniform arc-length spacing ``step``.

        The final point is kept, so the last interval may be shorter.
        """
        if step <= 0:
            raise ValueError("resample step must be positive")
        raw = cls(waypoints)
        total = raw.length
        n = int(math.floor(total / step + 1e-9))
        s = np.arange(n + 1) * step
        if total - s[-1] > 1e-6 * step:
            s = np.append(s, total)
        else:
            s[-1] = total
        x, y, _ = raw.evaluate(s)
        return cls(np.column_stack([x, y]))

    def _vertex_curvature(self) -> np.ndarray:
        # finite differences of tangent heading, one value per waypoint
        n = self.x.shape[0]
        kappa = np.zeros(n)
        if n > 2:
            dh = np.angle(np.exp(1j * np.diff(self.seg_heading)))
            ds = 0.5 * (self.seg_len[:-1] + self.seg_len[1:])
            kappa[1:-1] = dh / ds
            kappa[0] = kappa[1]
            kappa[-1] = kappa[-2]
        return kappa

    @property
    def waypoints(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @property
    def length(self) -> float:
        return float(self.cumulative_s[-1])

    def segment_index(self, s):
        idx = np.searchsorted(self.cumulative_s, s, side="right") - 1
        return np.clip(idx, 0, self.seg_len.shape[0] - 1)

    def evaluate(self, s):
        """Point and tangent heading at arc length ``s`` (array friendly)."""
        s = np.asarray(s, dtype=np.float64)
        i = self.segment_index(s)
        u = s - self.cumulative_s[i]
        return self.x[i] + u * self._tx[i], self.y[i] + u * self._ty[i], self.seg_heading[i]

    def curvature(self, s):
        """Curvature at ``s`` interpolated between vertex estimates."""
        return np.interp(s, self.cumulative_s, self.vertex_kappa)

    def to_frenet(self, px, py):
        """Vectorized projection; returns ``(s, d, dist)`` arrays."""
        s, d, dist, _ = _core.project_points(
            np.atleast_1d(px), np.atleast_1d(py), self.x, self.y, self.cumulative_s
        )
        return s, d, dist

    def to_cartesian(self, s, d):
        """Vectorized inverse; returns ``(x, y, heading)`` arrays."""
        s = np.asarray(s, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        i = self.segment_index(s)
        u = s - self.cumulative_s[i]
        tx = self._tx[i]
        ty = self._ty[i]
        x = self.x[i] + u * tx - d * ty
        y = self.y[i] + u * ty + d * tx
        return x, y, self.seg_heading[i]


@dataclass(frozen=True)
class MapModel:
    reference_line: ReferenceLine
    lane_width: float = 3.5
    lane_count: int = 1
    speed_limit: float = 33.0
    road_type: str = "highway"
    # lanes to the right of the reference lane
    ref_lane_index: int = 0
    max_projection_distance: float = 50.0

    def __post_init__(self):
        if self.lane_width <= 0:
            raise ValueError("lane_width must be positive")
        if self.lane_count < 1:
            raise ValueError("lane_count must be at least 1")
        if not 0 <= self.ref_lane_index < self.lane_count:
            raise ValueError("ref_lane_index must name one of the lanes")
        if self.road_type not in ("highway", "urban"):
            raise ValueError(f"unknown road_type {self.road_type!r}")

    @property
    def length(self) -> float:
        return self.reference_line.length

    @property
    def d_bounds(self) -> tuple[float, float]:
        w = self.lane_width
        return (
            -(self.ref_lane_index + 0.5) * w,
            (self.lane_count - self.ref_lane_index - 0.5) * w,
        )


def cartesian_to_frenet(map_: MapModel, p) -> FrenetPoint:
    """Project ``p`` onto the reference line.

    Raises :class:`OutOfCorridor` when the point is farther than the map's
    ``max_projection_distance`` from the polyline.
    """
    x, y = float(p[0]), float(p[1])
    s, d, dist = map_.reference_line.to_frenet([x], [y])
    if dist[0] > map_.max_projection_distance:
        raise OutOfCorridor(
            f"point ({x:.3f}, {y:.3f}) is {dist[0]:.3f} m from the reference line"
        )
    return FrenetPoint(float(s[0]), float(d[0]))


def frenet_to_cartesian(map_: MapModel, f: FrenetPoint) -> tuple[float, float, float]:
    """Return ``(x, y, heading)``; heading is the reference tangent at ``s``."""
    s = f.s
    length = map_.length
    if not (-_S_EPS <= s <= length + _S_EPS):
        raise OutOfRange(f"s={s} outside [0, {length}]")
    s = min(max(s, 0.0), length)
    x, y, h = map_.reference_line.to_cartesian(s, f.d)
    return float(x), float(y), float(h)


def corridor_bounds(map_: MapModel, s: float) -> tuple[float, float]:
    if not (-_S_EPS <= s <= map_.length + _S_EPS):
        raise OutOfRange(f"s={s} outside [0, {map_.length}]")
    return map_.d_bounds
