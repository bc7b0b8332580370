"""Steering and longitudinal control laws.

Lateral control is lookahead (pure-pursuit style) steering toward a preview
point on the target path. Longitudinal platoon control combines spacing
maintenance and speed keeping relative to both the predecessor and the
platoon leader; gains act on errors with stabilizing sign, so a positive
spacing error (gap too large) accelerates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from twinbed.errors import OffTrackError
from twinbed.track import WaypointPath
from twinbed.vehicle import VehicleParams, VehicleState, normalize_heading

OFF_TRACK_LIMIT_M = 1.0
WAYPOINT_DONE_TOLERANCE_M = 0.05


class Path(Protocol):
    length: float
    closed: bool

    def point_at(self, s: float) -> tuple[float, float]: ...

    def project(self, x: float, y: float) -> tuple[float, float]: ...

    def curvature_at(self, s: float) -> float: ...


@dataclass(frozen=True)
class PlatoonGains:
    """Feedback gains of the longitudinal platoon law."""

    k_p: float = 1.2
    k_v1: float = 0.4
    k_v2: float = 0.8
    s_des_m: float = 0.5
    dt_s: float = 0.125

    def __post_init__(self) -> None:
        for name in ("k_p", "k_v1", "k_v2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"gain {name} must be finite")


@dataclass(frozen=True)
class PathTarget:
    """Arc-length parameterized path plus the preview distance."""

    path: Path
    lookahead_m: float = 0.4

    def __post_init__(self) -> None:
        if self.lookahead_m <= 0:
            raise ValueError("lookahead must be positive")


def platoon_accel(
    self_v: float,
    pred_v: float,
    leader_v: float,
    spacing_m: float,
    gains: PlatoonGains,
    params: VehicleParams,
) -> float:
    """Longitudinal acceleration from spacing and speed-keeping errors.

    a = k_p (spacing - s_des) - k_v1 (v - v_leader) - k_v2 (v - v_pred),
    saturated to the vehicle's acceleration envelope. Spacing is measured
    along the track arc to the predecessor ahead.
    """
    accel = (
        gains.k_p * (spacing_m - gains.s_des_m)
        - gains.k_v1 * (self_v - leader_v)
        - gains.k_v2 * (self_v - pred_v)
    )
    return params.accel_limit_mps2.clamp(accel)


def preview_steer(pose: VehicleState, target: PathTarget, params: VehicleParams) -> float:
    """Steer toward the path point one lookahead distance ahead.

    phi = atan(2 L sin(alpha) / lookahead) where alpha is the heading error to
    the preview point; clamped to the steering envelope. On a circle of radius
    R with matching heading this settles at atan(L / R).
    """
    path = target.path
    s0, dist = path.project(pose.x_m, pose.y_m)
    if dist > OFF_TRACK_LIMIT_M:
        raise OffTrackError(f"pose is {dist:.2f} m from the target path")
    s_preview = s0 + target.lookahead_m
    if not path.closed:
        s_preview = min(s_preview, path.length)
    px, py = path.point_at(s_preview)
    dx, dy = px - pose.x_m, py - pose.y_m
    chord = math.hypot(dx, dy)
    if chord < 1e-9:
        return 0.0
    alpha = normalize_heading(math.atan2(dx, dy) - pose.heading_rad)
    phi = math.atan2(2.0 * params.wheelbase_m * math.sin(alpha), chord)
    return params.steer_limit_rad.clamp(phi)


@dataclass(frozen=True)
class WaypointFollowResult:
    speed_mps: float
    steer_rad: float
    done: bool


def waypoint_follow(
    pose: VehicleState,
    waypoints: list[tuple[float, float]],
    params: VehicleParams,
    lookahead_m: float = 0.4,
    cruise_speed_mps: float = 0.3,
    curve_slowdown: float = 0.5,
) -> WaypointFollowResult:
    """Track an equidistant waypoint sequence.

    Steering previews the first waypoint at least one lookahead ahead; speed
    is the cruise value reduced on curvature. Completion fires once the final
    waypoint is within tolerance, or when every waypoint is behind the pose.
    """
    final = waypoints[-1]
    if math.hypot(final[0] - pose.x_m, final[1] - pose.y_m) <= WAYPOINT_DONE_TOLERANCE_M:
        return WaypointFollowResult(0.0, 0.0, True)
    if len(waypoints) == 1:
        path: Path = WaypointPath([(pose.x_m, pose.y_m), final])
    else:
        path = WaypointPath(list(waypoints))
    s0, _ = path.project(pose.x_m, pose.y_m)
    if s0 >= path.length - 1e-9:
        return WaypointFollowResult(0.0, 0.0, True)
    steer = preview_steer(pose, PathTarget(path=path, lookahead_m=lookahead_m), params)
    kappa = path.curvature_at(min(s0 + lookahead_m, path.length))
    speed = cruise_speed_mps / (1.0 + curve_slowdown * abs(kappa))
    speed = params.speed_limit_mps.clamp(speed)
    return WaypointFollowResult(speed, steer, False)
