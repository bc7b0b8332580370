"""Sand-table geometry: the closed ring track and open waypoint paths.

The outer ring is a rounded rectangle (straight segments joined by
quarter-circle corners) parameterized by arc length. Headings follow the
vehicle-model convention (theta measured from +Y), so the tangent at arc
position s is atan2(dx, dy) and curvature is d(theta)/ds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from twinbed.errors import ConfigError
from twinbed.vehicle import normalize_heading


@dataclass(frozen=True)
class _Straight:
    x0: float
    y0: float
    ux: float
    uy: float
    length: float

    def point(self, u: float) -> tuple[float, float]:
        return self.x0 + self.ux * u, self.y0 + self.uy * u

    def heading(self, u: float) -> float:
        return math.atan2(self.ux, self.uy)

    def curvature(self, u: float) -> float:
        return 0.0

    def project(self, x: float, y: float) -> tuple[float, float]:
        u = (x - self.x0) * self.ux + (y - self.y0) * self.uy
        u = max(0.0, min(self.length, u))
        px, py = self.point(u)
        return u, math.hypot(x - px, y - py)


@dataclass(frozen=True)
class _Arc:
    """Counterclockwise circular arc (all ring corners sweep ccw)."""

    cx: float
    cy: float
    radius: float
    angle0: float  # standard math angle of the start point around the center
    sweep: float  # positive sweep in radians
    length: float

    def _angle(self, u: float) -> float:
        return self.angle0 + self.sweep * (u / self.length)

    def point(self, u: float) -> tuple[float, float]:
        a = self._angle(u)
        return self.cx + self.radius * math.cos(a), self.cy + self.radius * math.sin(a)

    def heading(self, u: float) -> float:
        a = self._angle(u)
        # ccw tangent, expressed in the +Y-referenced heading convention
        return math.atan2(-math.sin(a), math.cos(a))

    def curvature(self, u: float) -> float:
        # dtheta/ds with theta measured from +Y: ccw travel decreases theta
        return -1.0 / self.radius

    def project(self, x: float, y: float) -> tuple[float, float]:
        a = math.atan2(y - self.cy, x - self.cx)
        rel = (a - self.angle0) % (2.0 * math.pi)
        if rel <= self.sweep:
            frac = rel / self.sweep
        else:
            # outside the sweep: snap to the nearer endpoint
            frac = 1.0 if rel - self.sweep < 2.0 * math.pi - rel else 0.0
        u = frac * self.length
        px, py = self.point(u)
        return u, math.hypot(x - px, y - py)


class Track:
    """Closed, arc-length parameterized centerline of the outer ring road."""

    def __init__(self, segments: list) -> None:
        if not segments:
            raise ConfigError("track needs at least one segment")
        self._segments = segments
        self._offsets: list[float] = []
        s = 0.0
        for seg in segments:
            self._offsets.append(s)
            s += seg.length
        self.length = s
        p_first = segments[0].point(0.0)
        p_last = segments[-1].point(segments[-1].length)
        if math.dist(p_first, p_last) > 1e-9:
            raise ConfigError("track is not closed")

    @classmethod
    def rounded_rect(
        cls,
        center_x: float,
        center_y: float,
        straight_x: float,
        straight_y: float,
        corner_radius: float,
    ) -> "Track":
        """Build the ring: two straights of each length joined by r-corners.

        The centerline bounding box is (straight_x + 2r) x (straight_y + 2r),
        traversed counterclockwise starting at the left end of the bottom
        straight.
        """
        if corner_radius <= 0:
            raise ConfigError("corner radius must be positive")
        if straight_x < 0 or straight_y < 0:
            raise ConfigError("straight lengths cannot be negative")
        hx, hy, r = straight_x / 2.0, straight_y / 2.0, corner_radius
        cx, cy = center_x, center_y
        quarter = math.pi / 2.0
        arc_len = quarter * r
        segs = [
            _Straight(cx - hx, cy - hy - r, 1.0, 0.0, straight_x),
            _Arc(cx + hx, cy - hy, r, -quarter, quarter, arc_len),
            _Straight(cx + hx + r, cy - hy, 0.0, 1.0, straight_y),
            _Arc(cx + hx, cy + hy, r, 0.0, quarter, arc_len),
            _Straight(cx + hx, cy + hy + r, -1.0, 0.0, straight_x),
            _Arc(cx - hx, cy + hy, r, quarter, quarter, arc_len),
            _Straight(cx - hx - r, cy + hy, 0.0, -1.0, straight_y),
            _Arc(cx - hx, cy - hy, r, math.pi, quarter, arc_len),
        ]
        return cls(segs)

    def wrap(self, s: float) -> float:
        return s % self.length

    def _locate(self, s: float):
        s = self.wrap(s)
        # linear scan; the ring has 8 segments
        for i in range(len(self._segments) - 1, -1, -1):
            if s >= self._offsets[i] - 1e-12:
                return self._segments[i], s - self._offsets[i]
        return self._segments[0], s

    def point_at(self, s: float) -> tuple[float, float]:
        seg, u = self._locate(s)
        return seg.point(u)

    def heading_at(self, s: float) -> float:
        seg, u = self._locate(s)
        return normalize_heading(seg.heading(u))

    def curvature_at(self, s: float) -> float:
        seg, u = self._locate(s)
        return seg.curvature(u)

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Arc position of the closest centerline point and the distance to it."""
        best_s, best_d = 0.0, math.inf
        for seg, off in zip(self._segments, self._offsets):
            u, d = seg.project(x, y)
            if d < best_d:
                best_s, best_d = off + u, d
        return self.wrap(best_s), best_d

    def arc_ahead(self, s_from: float, s_to: float) -> float:
        """Forward arc distance from s_from to s_to, modulo track length."""
        return (s_to - s_from) % self.length

    def waypoints(self, s_start: float, forward_dist: float, spacing: float) -> list[tuple[float, float]]:
        """Equidistant waypoints covering forward_dist of track from s_start.

        Spacing is adjusted to divide the distance exactly, so the final
        waypoint lands on s_start + forward_dist.
        """
        if forward_dist <= 0:
            return [self.point_at(s_start)]
        n = max(1, round(forward_dist / spacing))
        step = forward_dist / n
        return [self.point_at(s_start + k * step) for k in range(n + 1)]

    @property
    def closed(self) -> bool:
        return True


class WaypointPath:
    """Open polyline through waypoints, arc-length parameterized by chords."""

    def __init__(self, points: list[tuple[float, float]]):
        if len(points) < 2:
            raise ConfigError("waypoint path needs at least two points")
        self.points = [(float(x), float(y)) for x, y in points]
        self._segments: list[_Straight] = []
        self._offsets: list[float] = []
        s = 0.0
        for (x0, y0), (x1, y1) in zip(self.points, self.points[1:]):
            length = math.hypot(x1 - x0, y1 - y0)
            if length <= 0:
                raise ConfigError("consecutive waypoints coincide")
            self._segments.append(
                _Straight(x0, y0, (x1 - x0) / length, (y1 - y0) / length, length)
            )
            self._offsets.append(s)
            s += length
        self.length = s

    def point_at(self, s: float) -> tuple[float, float]:
        s = max(0.0, min(self.length, s))
        for seg, off in zip(reversed(self._segments), reversed(self._offsets)):
            if s >= off - 1e-12:
                return seg.point(min(s - off, seg.length))
        return self.points[0]

    def heading_at(self, s: float) -> float:
        s = max(0.0, min(self.length, s))
        for seg, off in zip(reversed(self._segments), reversed(self._offsets)):
            if s >= off - 1e-12:
                return normalize_heading(seg.heading(0.0))
        return normalize_heading(self._segments[0].heading(0.0))

    def curvature_at(self, s: float) -> float:
        """Discrete curvature: heading change across the joint nearest to s."""
        s = max(0.0, min(self.length, s))
        for i in range(len(self._segments) - 1, -1, -1):
            if s >= self._offsets[i] - 1e-12:
                if i + 1 >= len(self._segments):
                    return 0.0
                dtheta = normalize_heading(
                    self._segments[i + 1].heading(0.0) - self._segments[i].heading(0.0)
                )
                ds = 0.5 * (self._segments[i].length + self._segments[i + 1].length)
                return dtheta / ds
        return 0.0

    def project(self, x: float, y: float) -> tuple[float, float]:
        best_s, best_d = 0.0, math.inf
        for seg, off in zip(self._segments, self._offsets):
            u, d = seg.project(x, y)
            if d < best_d:
                best_s, best_d = off + u, d
        return best_s, best_d

    def spacing_spread(self) -> float:
        """Max relative deviation of chord lengths from their mean."""
        lengths = [seg.length for seg in self._segments]
        mean = sum(lengths) / len(lengths)
        return max(abs(l - mean) / mean for l in lengths)

    @property
    def closed(self) -> bool:
        return False


@dataclass(frozen=True)
class SandTable:
    """The 9 x 5 m table hosting the ring track."""

    width_m: float = 9.0
    height_m: float = 5.0
    lane_width_m: float = 0.240
    track: Track = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.track is None:
            object.__setattr__(self, "track", default_ring(self.width_m, self.height_m))
        self._validate_track_inside()

    def _validate_track_inside(self) -> None:
        n = max(64, int(self.track.length / 0.05))
        for k in range(n):
            x, y = self.track.point_at(self.track.length * k / n)
            if not self.in_bounds(x, y):
                raise ConfigError(f"track leaves the table at ({x:.3f}, {y:.3f})")

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width_m and 0.0 <= y <= self.height_m


def default_ring(width_m: float = 9.0, height_m: float = 5.0, margin_m: float = 0.5,
                 corner_radius_m: float = 0.5) -> Track:
    """Outer ring road: centerline box inset by margin, quarter-circle corners."""
    box_w = width_m - 2.0 * margin_m
    box_h = height_m - 2.0 * margin_m
    straight_x = box_w - 2.0 * corner_radius_m
    straight_y = box_h - 2.0 * corner_radius_m
    if straight_x < 0 or straight_y < 0:
        raise ConfigError("corner radius too large for the table")
    return Track.rounded_rect(width_m / 2.0, height_m / 2.0, straight_x, straight_y, corner_radius_m)
