"""Kinematic bicycle model and the command-saturation sandbox.

State convention follows the testbed hardware: heading theta is measured from
the +Y axis, so X integrates with sin(theta) and Y with cos(theta). Positive
steering turns the heading toward +X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from twinbed.errors import ModelDomainError

TWO_PI = 2.0 * math.pi
MAX_STEP_DT = 0.05


def normalize_heading(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Interval:
    """Closed interval used for actuation limits."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def clamp(self, value: float) -> float:
        return max(self.lo, min(self.hi, value))

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class VehicleParams:
    """Geometry and actuation envelope shared by miniature and cloud vehicles.

    Defaults are the testbed values: 0.15 m wheelbase, steering within
    +/-40 deg, speed within [0, 1] m/s, acceleration within +/-4.5 m/s^2,
    and a 200 x 180 mm chassis.
    """

    wheelbase_m: float = 0.15
    steer_limit_rad: Interval = Interval(-math.radians(40.0), math.radians(40.0))
    speed_limit_mps: Interval = Interval(0.0, 1.0)
    accel_limit_mps2: Interval = Interval(-4.5, 4.5)
    body_length_m: float = 0.200
    body_width_m: float = 0.180

    def __post_init__(self) -> None:
        if self.wheelbase_m <= 0:
            raise ValueError("wheelbase must be positive")
        if self.body_length_m <= 0 or self.body_width_m <= 0:
            raise ValueError("body dimensions must be positive")


@dataclass(frozen=True)
class VehicleState:
    """Pose and speed of any vehicle; position is the rear-axle center."""

    x_m: float
    y_m: float
    heading_rad: float
    speed_mps: float
    steer_rad: float = 0.0


@dataclass(frozen=True)
class ControlInput:
    """Acceleration and front-wheel-angle command."""

    accel_mps2: float
    steer_rad: float


@dataclass(frozen=True)
class ClampReport:
    """Which command fields the sandbox saturated; empty means untouched."""

    saturated: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.saturated)


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ModelDomainError(f"{name} is not finite: {value!r}")


def step_bicycle(
    state: VehicleState,
    control: ControlInput,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """Advance one explicit-Euler step of the kinematic bicycle model.

    Xdot = v sin(theta), Ydot = v cos(theta), thetadot = tan(phi) v / L,
    vdot = a. Speed is clamped to the params envelope after the update and
    heading is renormalized to [-pi, pi). The control input is expected to be
    sandbox-clamped already.
    """
    _require_finite(
        x_m=state.x_m,
        y_m=state.y_m,
        heading_rad=state.heading_rad,
        speed_mps=state.speed_mps,
        accel_mps2=control.accel_mps2,
        steer_rad=control.steer_rad,
    )
    if not 0.0 < dt <= MAX_STEP_DT:
        raise ModelDomainError(f"dt must be in (0, {MAX_STEP_DT}] s, got {dt}")

    v = state.speed_mps
    theta = state.heading_rad
    x = state.x_m + v * math.sin(theta) * dt
    y = state.y_m + v * math.cos(theta) * dt
    theta = normalize_heading(
        theta + math.tan(control.steer_rad) * v / params.wheelbase_m * dt
    )
    v = params.speed_limit_mps.clamp(v + control.accel_mps2 * dt)
    return VehicleState(
        x_m=x, y_m=y, heading_rad=theta, speed_mps=v, steer_rad=control.steer_rad
    )


def sandbox_clamp(
    control: ControlInput,
    requested_speed_mps: float,
    params: VehicleParams,
) -> tuple[ControlInput, float, ClampReport]:
    """Saturate a command to the vehicle envelope before it reaches any plant.

    Mirrors the onboard sandbox: every received value is forced into its valid
    range and the report records which fields were touched. Total function;
    non-finite requests saturate like any out-of-range value.
    """
    saturated: list[str] = []

    accel = params.accel_limit_mps2.clamp(control.accel_mps2)
    if accel != control.accel_mps2:
        saturated.append("accel")
    steer = params.steer_limit_rad.clamp(control.steer_rad)
    if steer != control.steer_rad:
        saturated.append("steer")
    speed = params.speed_limit_mps.clamp(requested_speed_mps)
    if speed != requested_speed_mps:
        saturated.append("speed")

    return ControlInput(accel_mps2=accel, steer_rad=steer), speed, ClampReport(tuple(saturated))


def tracking_accel(
    speed_mps: float,
    target_speed_mps: float,
    tau_s: float | None,
    dt: float,
    params: VehicleParams,
) -> float:
    """Acceleration that drives speed toward a commanded speed.

    With a first-order time constant tau_s the response is the lagged
    miniature-vehicle behavior; with tau_s None (or 0) the target is reached
    as fast as the acceleration envelope allows, which is the idealized cloud
    response. Shared by both vehicle kinds so that disabling the lag makes
    their trajectories bitwise identical.
    """
    if tau_s:
        accel = (target_speed_mps - speed_mps) / tau_s
    else:
        accel = (target_speed_mps - speed_mps) / dt
    return params.accel_limit_mps2.clamp(accel)
