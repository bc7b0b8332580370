"""Cyber space: mapping vehicles mirroring observations, cloud vehicles
simulated with the ideal bicycle model, and platoon-ordered world views.

Mapping vehicles dead-reckon between 8 Hz fixes and snap toward each new
observation with a bounded correction, so their interpolated state never
teleports. Cloud vehicles have no physical counterpart and respond to speed
commands as fast as the acceleration envelope allows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from twinbed.errors import ConfigError
from twinbed.estimation import WindowedSpeedEstimator
from twinbed.physical import PoseObservation
from twinbed.track import Track
from twinbed.vehicle import (
    ControlInput,
    VehicleParams,
    VehicleState,
    sandbox_clamp,
    step_bicycle,
    tracking_accel,
)


class MappingVehicle:
    """Virtual mirror of a physical vehicle, updated from localization fixes."""

    def __init__(
        self,
        vehicle_id: str,
        params: VehicleParams,
        initial_state: VehicleState | None = None,
        speed_window_s: float = 0.25,
        correction_max_m: float = 0.05,
        correction_gain: float = 1.0,
    ):
        self.id = vehicle_id
        self.params = params
        self.state = initial_state or VehicleState(0.0, 0.0, 0.0, 0.0)
        self.correction_max_m = correction_max_m
        self.correction_gain = correction_gain
        self.correction_spread_s = 0.15
        self.staleness_s = 0.0
        self.dropped_count = 0
        self._estimator = WindowedSpeedEstimator(speed_window_s)
        self._last_capture_time: float | None = None
        self._pending_corr = (0.0, 0.0)  # bled in during dead-reckoning

    def sync(self, obs: PoseObservation) -> None:
        """Fold one fix into the interpolated state; out-of-order fixes drop."""
        if obs.vehicle_id != self.id:
            raise ConfigError(f"observation for {obs.vehicle_id!r} fed to {self.id!r}")
        if self._last_capture_time is not None and obs.capture_time <= self._last_capture_time:
            self.dropped_count += 1
            return
        self._last_capture_time = obs.capture_time
        speed = self._estimator.add_fix(obs.capture_time, obs.x_m, obs.y_m)
        if speed is not None:
            # a mirror of a physical vehicle cannot outrun the envelope, no
            # matter what noisy fixes suggest
            speed = self.params.speed_limit_mps.clamp(speed)

        # partial correction toward the fix smooths localization noise; the
        # hard cap bounds any single update so the mirror never teleports
        dx = (obs.x_m - self.state.x_m) * self.correction_gain
        dy = (obs.y_m - self.state.y_m) * self.correction_gain
        dist = math.hypot(dx, dy)
        if dist > self.correction_max_m:
            scale = self.correction_max_m / dist
            dx *= scale
            dy *= scale
        # the correction is applied gradually while dead-reckoning so the
        # mirrored pose stays continuous instead of stepping at each fix
        self._pending_corr = (dx, dy)
        self.state = VehicleState(
            x_m=self.state.x_m,
            y_m=self.state.y_m,
            heading_rad=obs.heading_rad,
            speed_mps=speed if speed is not None else self.state.speed_mps,
            steer_rad=self.state.steer_rad,
        )
        self.staleness_s = 0.0

    def dead_reckon(self, dt: float) -> None:
        """Constant speed/heading extrapolation plus pending fix correction."""
        v = self.state.speed_mps
        cx, cy = self._pending_corr
        if cx or cy:
            frac = min(1.0, dt / self.correction_spread_s)
            dx_corr, dy_corr = cx * frac, cy * frac
            self._pending_corr = (cx - dx_corr, cy - dy_corr)
        else:
            dx_corr = dy_corr = 0.0
        self.state = VehicleState(
            x_m=self.state.x_m + v * math.sin(self.state.heading_rad) * dt + dx_corr,
            y_m=self.state.y_m + v * math.cos(self.state.heading_rad) * dt + dy_corr,
            heading_rad=self.state.heading_rad,
            speed_mps=v,
            steer_rad=self.state.steer_rad,
        )
        self.staleness_s += dt

    @property
    def estimated_speed(self) -> float:
        return self.state.speed_mps


def sync_mapping(vehicle: MappingVehicle, obs: PoseObservation) -> MappingVehicle:
    """Functional wrapper around MappingVehicle.sync."""
    vehicle.sync(obs)
    return vehicle


class CloudVehicle:
    """Purely virtual vehicle on the ideal (lag-free) bicycle model."""

    def __init__(self, vehicle_id: str, params: VehicleParams, initial_state: VehicleState):
        self.id = vehicle_id
        self.params = params
        self.state = initial_state
        self.commanded_speed_mps = initial_state.speed_mps
        self.commanded_steer_rad = initial_state.steer_rad

    def set_command(self, speed_mps: float, steer_rad: float) -> None:
        control, speed, _ = sandbox_clamp(
            ControlInput(accel_mps2=0.0, steer_rad=steer_rad), speed_mps, self.params
        )
        self.commanded_speed_mps = speed
        self.commanded_steer_rad = control.steer_rad

    def tick(self, dt: float) -> None:
        accel = tracking_accel(
            self.state.speed_mps, self.commanded_speed_mps, None, dt, self.params
        )
        self.state = step_bicycle(
            self.state,
            ControlInput(accel_mps2=accel, steer_rad=self.commanded_steer_rad),
            dt,
            self.params,
        )


def step_cloud(
    state: VehicleState, control: ControlInput, dt: float, params: VehicleParams
) -> VehicleState:
    """One ideal-model step: sandbox-clamp the input, then integrate."""
    clamped, _, _ = sandbox_clamp(control, state.speed_mps, params)
    return step_bicycle(state, clamped, dt, params)


@dataclass(frozen=True)
class PlatoonEntry:
    vehicle_id: str
    kind: str  # "mapping" | "cloud"
    state: VehicleState
    arc_pos_m: float
    predecessor_id: str | None
    spacing_m: float | None
    collision: bool


@dataclass(frozen=True)
class PlatoonView:
    entries: tuple[PlatoonEntry, ...]
    collision: bool


def compose_world(
    mappings: list[MappingVehicle],
    clouds: list[CloudVehicle],
    track: Track,
    body_length_m: float = 0.200,
) -> PlatoonView:
    """Order all vehicles by arc position with predecessor links.

    The predecessor of a vehicle is the next one ahead along the travel
    direction (cyclic on the ring); spacing is forward arc distance modulo
    track length. Two vehicles within one body length raise the collision
    flag.
    """
    records: list[tuple[str, str, VehicleState, float]] = []
    for m in mappings:
        s, _ = track.project(m.state.x_m, m.state.y_m)
        records.append((m.id, "mapping", m.state, s))
    for c in clouds:
        s, _ = track.project(c.state.x_m, c.state.y_m)
        records.append((c.id, "cloud", c.state, s))
    records.sort(key=lambda r: (r[3], r[0]))

    entries: list[PlatoonEntry] = []
    any_collision = False
    n = len(records)
    for i, (vid, kind, state, s) in enumerate(records):
        if n == 1:
            pred_id, spacing, collide = None, None, False
        else:
            pred_vid, _, _, pred_s = records[(i + 1) % n]
            spacing = track.arc_ahead(s, pred_s)
            gap = min(spacing, track.length - spacing)
            collide = gap < body_length_m
            pred_id = pred_vid
            any_collision = any_collision or collide
        entries.append(
            PlatoonEntry(
                vehicle_id=vid, kind=kind, state=state, arc_pos_m=s,
                predecessor_id=pred_id, spacing_m=spacing, collision=collide,
            )
        )
    return PlatoonView(entries=tuple(entries), collision=any_collision)
