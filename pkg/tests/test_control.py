import math

import pytest

from twinbed.control import (
    PathTarget,
    PlatoonGains,
    WaypointFollowResult,
    platoon_accel,
    preview_steer,
    waypoint_follow,
)
from twinbed.errors import OffTrackError
from twinbed.track import WaypointPath
from twinbed.vehicle import ControlInput, VehicleState, step_bicycle


class Circle:
    """Closed circular path in the +Y-referenced heading convention."""

    closed = True

    def __init__(self, radius, cx=0.0, cy=0.0):
        self.radius = radius
        self.cx, self.cy = cx, cy
        self.length = 2.0 * math.pi * radius

    def point_at(self, s):
        a = s / self.radius
        return self.cx + self.radius * math.cos(a), self.cy + self.radius * math.sin(a)

    def project(self, x, y):
        a = math.atan2(y - self.cy, x - self.cx) % (2.0 * math.pi)
        px, py = self.point_at(a * self.radius)
        return a * self.radius, math.hypot(x - px, y - py)

    def curvature_at(self, s):
        return -1.0 / self.radius


class TestPlatoonAccel:
    def test_equilibrium_zero(self, params):
        gains = PlatoonGains()
        a = platoon_accel(0.2, 0.2, 0.2, gains.s_des_m, gains, params)
        assert a == 0.0

    def test_pure_spacing_gain(self, params):
        gains = PlatoonGains(k_p=1.0, k_v1=0.0, k_v2=0.0)
        a = platoon_accel(0.2, 0.2, 0.2, gains.s_des_m + 0.1, gains, params)
        assert a == pytest.approx(0.1)

    def test_saturates_at_envelope(self, params):
        gains = PlatoonGains()
        assert platoon_accel(0.0, 0.0, 0.0, 100.0, gains, params) == 4.5
        assert platoon_accel(0.0, 0.0, 0.0, -100.0, gains, params) == -4.5

    def test_positive_spacing_error_accelerates(self, params):
        gains = PlatoonGains()
        assert platoon_accel(0.2, 0.2, 0.2, 0.7, gains, params) > 0.0

    def test_faster_than_leader_brakes(self, params):
        gains = PlatoonGains()
        assert platoon_accel(0.3, 0.2, 0.2, gains.s_des_m, gains, params) < 0.0

    def test_linearity_before_saturation(self, params):
        gains = PlatoonGains(k_p=0.5, k_v1=0.3, k_v2=0.2)
        base = platoon_accel(0.2, 0.2, 0.2, 0.5, gains, params)
        only_spacing = platoon_accel(0.2, 0.2, 0.2, 0.6, gains, params) - base
        only_leader = platoon_accel(0.2, 0.2, 0.25, 0.5, gains, params) - base
        only_pred = platoon_accel(0.2, 0.25, 0.2, 0.5, gains, params) - base
        combined = platoon_accel(0.2, 0.25, 0.25, 0.6, gains, params)
        assert combined == pytest.approx(base + only_spacing + only_leader + only_pred)

    def test_equilibrium_unique_for_nonzero_gains(self, params):
        gains = PlatoonGains(k_p=1.0, k_v1=0.5, k_v2=0.5)
        # any deviation from (s_des, equal speeds) produces a nonzero response
        assert platoon_accel(0.2, 0.2, 0.2, 0.51, gains, params) != 0.0
        assert platoon_accel(0.21, 0.2, 0.2, 0.5, gains, params) != 0.0
        assert platoon_accel(0.2, 0.21, 0.2, 0.5, gains, params) != 0.0

    def test_gain_scaling_scales_output(self, params):
        g1 = PlatoonGains(k_p=0.4, k_v1=0.2, k_v2=0.3)
        g2 = PlatoonGains(k_p=0.8, k_v1=0.4, k_v2=0.6)
        a1 = platoon_accel(0.25, 0.2, 0.22, 0.55, g1, params)
        a2 = platoon_accel(0.25, 0.2, 0.22, 0.55, g2, params)
        assert a2 == pytest.approx(2.0 * a1)

    def test_rejects_nonfinite_gains(self):
        with pytest.raises(ValueError):
            PlatoonGains(k_p=math.nan)


class TestPreviewSteer:
    def test_straight_aligned_zero_steer(self, params, track):
        x, y = track.point_at(1.0)
        pose = VehicleState(x, y, track.heading_at(1.0), 0.2)
        target = PathTarget(path=track, lookahead_m=0.4)
        assert preview_steer(pose, target, params) == pytest.approx(0.0, abs=1e-9)

    def test_circle_steady_state(self, params):
        # phi -> atan(L / R): for R = 0.85, L = 0.15 that is ~10 deg
        circle = Circle(0.85)
        x, y = circle.point_at(0.0)
        a = 0.0
        heading = math.atan2(-math.sin(a), math.cos(a))
        pose = VehicleState(x, y, heading, 0.2)
        steer = preview_steer(pose, PathTarget(path=circle, lookahead_m=0.4), params)
        assert steer == pytest.approx(-math.atan(0.15 / 0.85), abs=1e-3)
        assert abs(math.degrees(steer)) == pytest.approx(10.0, abs=0.1)

    def test_clamped_to_steer_limit(self, params):
        # preview point behind-left would need far more than 40 degrees
        path = WaypointPath([(0.0, 0.0), (0.0, 1.0)])
        pose = VehicleState(0.0, 0.5, math.pi / 2, 0.2)  # heading +X, path +Y
        steer = preview_steer(pose, PathTarget(path=path, lookahead_m=0.3), params)
        assert abs(steer) == pytest.approx(math.radians(40.0))

    def test_off_track_raises(self, params, track):
        pose = VehicleState(4.5, 2.5, 0.0, 0.2)  # table center, > 1 m from ring
        with pytest.raises(OffTrackError):
            preview_steer(pose, PathTarget(path=track, lookahead_m=0.4), params)

    def test_steering_continuity_along_ring(self, params, track):
        # closed-loop drive: consecutive 8 Hz steer commands differ <= 10 deg
        target = PathTarget(path=track, lookahead_m=0.3)
        x, y = track.point_at(6.0)
        state = VehicleState(x, y, track.heading_at(6.0), 0.3)
        prev_steer = None
        for k in range(400):
            if k % 12 == 0:
                steer = preview_steer(state, target, params)
                if prev_steer is not None:
                    assert abs(steer - prev_steer) <= math.radians(10.0)
                prev_steer = steer
            state = step_bicycle(state, ControlInput(0.0, steer), 0.01, params)


class TestWaypointFollow:
    def test_straight_line_cruise(self, params):
        waypoints = [(0.0, 0.1 * k) for k in range(10)]
        pose = VehicleState(0.0, 0.0, 0.0, 0.0)
        out = waypoint_follow(pose, waypoints, params, cruise_speed_mps=0.3)
        assert isinstance(out, WaypointFollowResult)
        assert not out.done
        assert out.steer_rad == pytest.approx(0.0, abs=1e-9)
        assert out.speed_mps == pytest.approx(0.3)

    def test_completion_at_final_waypoint(self, params):
        waypoints = [(0.0, 0.1 * k) for k in range(10)]
        pose = VehicleState(0.0, 0.9, 0.0, 0.1)
        out = waypoint_follow(pose, waypoints, params)
        assert out.done
        assert out.speed_mps == 0.0

    def test_completion_near_final_within_tolerance(self, params):
        waypoints = [(0.0, 0.0), (0.0, 0.5)]
        pose = VehicleState(0.01, 0.46, 0.0, 0.1)
        assert waypoint_follow(pose, waypoints, params).done

    def test_all_waypoints_behind_is_done(self, params):
        waypoints = [(0.0, 0.0), (0.0, 0.2)]
        pose = VehicleState(0.0, 0.8, 0.0, 0.1)
        assert waypoint_follow(pose, waypoints, params).done

    def test_semicircle_steady_steer(self, params):
        radius = 0.85
        arc = [
            (radius * math.cos(a), radius * math.sin(a))
            for a in [k * (math.pi / 60) for k in range(61)]
        ]
        a0 = math.pi / 6
        pose = VehicleState(
            radius * math.cos(a0),
            radius * math.sin(a0),
            math.atan2(-math.sin(a0), math.cos(a0)),
            0.2,
        )
        out = waypoint_follow(pose, arc, params, lookahead_m=0.3)
        assert abs(math.degrees(out.steer_rad)) == pytest.approx(10.0, abs=1.0)

    def test_curvature_slows_cruise(self, params):
        radius = 0.5
        arc = [
            (radius * math.cos(a), radius * math.sin(a))
            for a in [k * (math.pi / 30) for k in range(31)]
        ]
        pose = VehicleState(arc[0][0], arc[0][1],
                            math.atan2(-0.0, 1.0), 0.2)
        out = waypoint_follow(pose, arc, params, cruise_speed_mps=0.3, curve_slowdown=0.5)
        assert not out.done
        assert out.speed_mps < 0.3
