import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinbed.errors import ModelDomainError
from twinbed.vehicle import (
    ControlInput,
    Interval,
    VehicleParams,
    VehicleState,
    normalize_heading,
    sandbox_clamp,
    step_bicycle,
    tracking_accel,
)

MAX_STEER = math.radians(40.0)


class TestStepBicycle:
    def test_straight_line(self, params):
        # theta=0 points +Y, so a straight step moves y only
        state = VehicleState(0.0, 0.0, 0.0, 0.5)
        out = step_bicycle(state, ControlInput(0.0, 0.0), 0.05, params)
        out = step_bicycle(out, ControlInput(0.0, 0.0), 0.05, params)
        assert out.x_m == 0.0
        assert out.y_m == pytest.approx(0.05, abs=1e-12)
        assert out.heading_rad == 0.0
        assert out.speed_mps == 0.5

    def test_yaw_rate_at_full_steer(self, params):
        # tan(40 deg) / 0.15 ~= 5.594 rad/s at v = 1
        phi = math.radians(40.0)
        state = VehicleState(0.0, 0.0, 0.0, 1.0)
        dt = 0.01
        out = step_bicycle(state, ControlInput(0.0, phi), dt, params)
        yaw_rate = (out.heading_rad - state.heading_rad) / dt
        assert yaw_rate == pytest.approx(math.tan(phi) / 0.15, rel=1e-9)
        assert yaw_rate == pytest.approx(5.594, abs=5e-4)

    def test_circle_radius_oracle(self, params):
        # constant (v, phi) traces a circle of radius L / tan(phi)
        phi = math.radians(10.0)
        state = VehicleState(0.0, 0.0, 0.0, 0.5, phi)
        xs, ys = [], []
        n_rev = int(2 * math.pi / (math.tan(phi) * 0.5 / 0.15 * 0.01)) + 1
        start = (state.x_m, state.y_m)
        for _ in range(n_rev):
            state = step_bicycle(state, ControlInput(0.0, phi), 0.01, params)
            xs.append(state.x_m)
            ys.append(state.y_m)
        cx, cy = sum(xs) / len(xs), sum(ys) / len(ys)
        radius = sum(math.hypot(x - cx, y - cy) for x, y in zip(xs, ys)) / len(xs)
        assert radius == pytest.approx(0.15 / math.tan(phi), rel=0.01)
        assert radius == pytest.approx(0.8507, rel=0.01)
        # returns to start after one revolution
        assert math.hypot(state.x_m - start[0], state.y_m - start[1]) < 1e-2

    def test_speed_clamped_after_update(self, params):
        state = VehicleState(0.0, 0.0, 0.0, 0.99)
        out = step_bicycle(state, ControlInput(4.5, 0.0), 0.05, params)
        assert out.speed_mps == 1.0

    def test_no_reverse(self, params):
        state = VehicleState(0.0, 0.0, 0.0, 0.01)
        out = step_bicycle(state, ControlInput(-4.5, 0.0), 0.05, params)
        assert out.speed_mps == 0.0

    def test_heading_normalized(self, params):
        state = VehicleState(0.0, 0.0, 3.1, 1.0)
        out = step_bicycle(state, ControlInput(0.0, MAX_STEER), 0.05, params)
        assert -math.pi <= out.heading_rad < math.pi

    def test_rejects_nonfinite(self, params):
        state = VehicleState(0.0, 0.0, 0.0, math.nan)
        with pytest.raises(ModelDomainError):
            step_bicycle(state, ControlInput(0.0, 0.0), 0.01, params)
        with pytest.raises(ModelDomainError):
            step_bicycle(
                VehicleState(0.0, 0.0, 0.0, 0.5),
                ControlInput(math.inf, 0.0),
                0.01,
                params,
            )

    def test_rejects_bad_dt(self, params):
        state = VehicleState(0.0, 0.0, 0.0, 0.5)
        for dt in (0.0, -0.01, 0.06):
            with pytest.raises(ModelDomainError):
                step_bicycle(state, ControlInput(0.0, 0.0), dt, params)

    def test_deterministic(self, params):
        state = VehicleState(0.3, 0.4, 0.5, 0.6, 0.1)
        control = ControlInput(1.23, 0.21)
        a = step_bicycle(state, control, 0.01, params)
        b = step_bicycle(state, control, 0.01, params)
        assert a == b  # bit-for-bit

    @given(
        v=st.floats(0.0, 1.0),
        theta=st.floats(-math.pi, math.pi - 1e-9),
        accel=st.floats(-4.5, 4.5),
        steer=st.floats(-MAX_STEER, MAX_STEER),
    )
    @settings(max_examples=200)
    def test_envelope_preserved(self, v, theta, accel, steer):
        params = VehicleParams()
        state = VehicleState(1.0, 2.0, theta, v)
        out = step_bicycle(state, ControlInput(accel, steer), 0.01, params)
        assert 0.0 <= out.speed_mps <= 1.0
        assert -math.pi <= out.heading_rad < math.pi


class TestSandboxClamp:
    def test_speed_saturated(self, params):
        _, speed, report = sandbox_clamp(ControlInput(0.0, 0.0), 1.5, params)
        assert speed == 1.0
        assert report.saturated == ("speed",)

    def test_steer_saturated(self, params):
        control, _, report = sandbox_clamp(
            ControlInput(0.0, math.radians(55.0)), 0.5, params
        )
        assert control.steer_rad == pytest.approx(MAX_STEER)
        assert "steer" in report.saturated

    def test_accel_saturated(self, params):
        control, _, report = sandbox_clamp(ControlInput(-6.0, 0.0), 0.5, params)
        assert control.accel_mps2 == -4.5
        assert "accel" in report.saturated

    def test_in_range_untouched(self, params):
        control, speed, report = sandbox_clamp(ControlInput(1.0, 0.1), 0.5, params)
        assert control == ControlInput(1.0, 0.1)
        assert speed == 0.5
        assert not report
        assert report.saturated == ()

    @given(
        accel=st.floats(allow_nan=False, allow_infinity=False, width=32),
        steer=st.floats(allow_nan=False, allow_infinity=False, width=32),
        speed=st.floats(allow_nan=False, allow_infinity=False, width=32),
    )
    @settings(max_examples=500)
    def test_fuzz_never_escapes_envelope(self, accel, steer, speed):
        params = VehicleParams()
        control, clamped_speed, _ = sandbox_clamp(
            ControlInput(accel, steer), speed, params
        )
        assert -4.5 <= control.accel_mps2 <= 4.5
        assert -MAX_STEER <= control.steer_rad <= MAX_STEER
        assert 0.0 <= clamped_speed <= 1.0


class TestTrackingAccel:
    def test_first_order_lag(self, params):
        a = tracking_accel(0.0, 0.26, 0.3, 0.01, params)
        assert a == pytest.approx(0.26 / 0.3)

    def test_ideal_saturates(self, params):
        a = tracking_accel(0.0, 1.0, None, 0.01, params)
        assert a == 4.5

    def test_equilibrium(self, params):
        assert tracking_accel(0.26, 0.26, 0.3, 0.01, params) == 0.0


class TestInterval:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Interval(1.0, -1.0)

    def test_contains(self):
        iv = Interval(-1.0, 1.0)
        assert iv.contains(0.0) and iv.contains(1.0) and not iv.contains(1.1)


def test_normalize_heading_range():
    for theta in (-10.0, -math.pi, 0.0, math.pi, 10.0, 123.456):
        wrapped = normalize_heading(theta)
        assert -math.pi <= wrapped < math.pi
        # same angle modulo 2 pi
        assert math.isclose(
            math.sin(wrapped), math.sin(theta), abs_tol=1e-9
        ) and math.isclose(math.cos(wrapped), math.cos(theta), abs_tol=1e-9)
