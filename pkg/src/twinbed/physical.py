"""Physical-space emulation: miniature plants, overhead vision, workstation.

The real testbed localizes vehicles with overhead cameras (30 Hz capture,
roughly 8 Hz output after image processing) and a workstation closes the loop
at 8 Hz over wireless links. Here the camera pipeline is replaced by a
noise- and timing-faithful observation emulator: poses are ground truth plus
clipped Gaussian noise, emitted every Nth capture frame with the measured
stage-1 delay.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from twinbed.config import ControlSection, VisionSection
from twinbed.control import PathTarget, platoon_accel, preview_steer, waypoint_follow
from twinbed.errors import TwinbedError
from twinbed.estimation import LowPass, WindowedSpeedEstimator
from twinbed.hub import CloudHub, DirectMode, NodeMode, PlatoonMode, WaypointMode
from twinbed.latency import LatencyModel
from twinbed.track import SandTable
from twinbed.vehicle import (
    ControlInput,
    VehicleParams,
    VehicleState,
    sandbox_clamp,
    step_bicycle,
    tracking_accel,
)

STALE_OBSERVATION_S = 0.5


@dataclass(frozen=True)
class PoseObservation:
    """One noisy, delayed localization fix."""

    vehicle_id: str
    x_m: float
    y_m: float
    heading_rad: float
    capture_time: float
    emit_time: float
    out_of_bounds: bool = False


@dataclass
class MiniatureVehicle:
    """Emulated miniature-vehicle plant with first-order speed response."""

    id: str
    state: VehicleState
    params: VehicleParams
    speed_lag_tau_s: float | None = 0.3
    commanded_speed_mps: float = 0.0
    commanded_steer_rad: float = 0.0

    def set_command(self, speed_mps: float, steer_rad: float) -> None:
        """Onboard sandbox: saturate whatever arrives before it acts."""
        control, speed, _ = sandbox_clamp(
            ControlInput(accel_mps2=0.0, steer_rad=steer_rad), speed_mps, self.params
        )
        self.commanded_speed_mps = speed
        self.commanded_steer_rad = control.steer_rad

    def plant_step(self, dt: float) -> None:
        accel = tracking_accel(
            self.state.speed_mps, self.commanded_speed_mps, self.speed_lag_tau_s, dt, self.params
        )
        self.state = step_bicycle(
            self.state,
            ControlInput(accel_mps2=accel, steer_rad=self.commanded_steer_rad),
            dt,
            self.params,
        )


def plant_step(vehicle: MiniatureVehicle, dt: float) -> MiniatureVehicle:
    """Functional wrapper around MiniatureVehicle.plant_step."""
    out = replace(vehicle)
    out.plant_step(dt)
    return out


class VisionEmulator:
    """Overhead-camera stand-in: 30 Hz capture, every Nth frame emitted.

    Emitted poses carry per-axis additive noise (zero-mean Gaussian saturated
    at the measured maximum errors) and the stage-1 transmission delay.
    """

    def __init__(
        self,
        table: SandTable,
        vision: VisionSection,
        latency: LatencyModel,
        rng: random.Random,
    ):
        self.table = table
        self.vision = vision
        self.latency = latency
        self.rng = rng
        self.frame_index = 0
        self.capture_count = 0
        self.emit_count = 0

    def _noise(self, sigma: float, bound: float) -> float:
        if not self.vision.noise_enabled:
            return 0.0
        e = self.rng.gauss(0.0, sigma)
        return max(-bound, min(bound, e))

    def localize(self, vehicle_id: str, state: VehicleState, capture_time: float) -> PoseObservation:
        """Produce one observation for a ground-truth state at capture_time."""
        x = state.x_m + self._noise(self.vision.sigma_x_m, self.vision.max_err_x_m)
        y = state.y_m + self._noise(self.vision.sigma_y_m, self.vision.max_err_y_m)
        delay_s = self.latency.sample_s(1, self.rng)
        return PoseObservation(
            vehicle_id=vehicle_id,
            x_m=x,
            y_m=y,
            heading_rad=state.heading_rad,
            capture_time=capture_time,
            emit_time=capture_time + delay_s,
            out_of_bounds=not self.table.in_bounds(state.x_m, state.y_m),
        )

    def capture(self, truth: dict[str, VehicleState], now: float) -> list[PoseObservation]:
        """One 30 Hz capture tick; returns the emitted observations (if any)."""
        emit = self.frame_index % self.vision.output_every_n_frames == 0
        self.frame_index += 1
        self.capture_count += 1
        if not emit:
            return []
        observations = [self.localize(vid, state, now) for vid, state in truth.items()]
        self.emit_count += len(observations)
        return observations


class ObservationSmoother:
    """Predictor-corrector over localization fixes for one vehicle.

    Between fixes the position advances with the commanded speed along the
    observed heading; each fix pulls the estimate partway toward the
    measurement (bounded), which suppresses most of the localization noise
    without the lag a plain low-pass would add.
    """

    def __init__(self, gain: float = 0.3, correction_max_m: float = 0.05):
        self.gain = gain
        self.correction_max_m = correction_max_m
        self._x: float | None = None
        self._y = 0.0
        self._t = 0.0
        self._heading = 0.0
        self._speed_hint = 0.0

    def speed_hint(self, speed_mps: float) -> None:
        self._speed_hint = speed_mps

    def _advance(self, t: float) -> tuple[float, float]:
        dt = max(0.0, t - self._t)
        return (
            self._x + self._speed_hint * math.sin(self._heading) * dt,
            self._y + self._speed_hint * math.cos(self._heading) * dt,
        )

    def add_fix(self, obs: PoseObservation) -> None:
        if self._x is None:
            self._x, self._y = obs.x_m, obs.y_m
        else:
            px, py = self._advance(obs.capture_time)
            dx = (obs.x_m - px) * self.gain
            dy = (obs.y_m - py) * self.gain
            dist = math.hypot(dx, dy)
            if dist > self.correction_max_m:
                dx *= self.correction_max_m / dist
                dy *= self.correction_max_m / dist
            self._x, self._y = px + dx, py + dy
        self._heading = obs.heading_rad
        self._t = obs.capture_time

    def position_at(self, t: float) -> tuple[float, float] | None:
        if self._x is None:
            return None
        return self._advance(t)


class Workstation:
    """8 Hz control loop combining latest observations with active targets."""

    def __init__(
        self,
        hub: CloudHub,
        track_target: PathTarget,
        params: VehicleParams,
        control_cfg: ControlSection,
        vehicle_ids: list[str],
        initial_commands: dict[str, tuple[float, float]] | None = None,
    ):
        self.hub = hub
        self.track_target = track_target
        self.params = params
        self.cfg = control_cfg
        self.vehicle_ids = list(vehicle_ids)

        self._latest_obs: dict[str, PoseObservation] = {}
        self._estimators: dict[str, WindowedSpeedEstimator] = {
            vid: WindowedSpeedEstimator(control_cfg.speed_window_s) for vid in vehicle_ids
        }
        self._smoothers: dict[str, ObservationSmoother] = {
            vid: ObservationSmoother(gain=control_cfg.position_gain) for vid in vehicle_ids
        }
        # latest cyber-side records (cloud vehicles and mapping estimates)
        self._cyber: dict[str, dict] = {}
        self._filters: dict[tuple[str, str], LowPass] = {}
        self._last_command: dict[str, tuple[float, float]] = {
            vid: (initial_commands or {}).get(vid, (0.0, 0.0)) for vid in vehicle_ids
        }
        self.staleness_count: dict[str, int] = {vid: 0 for vid in vehicle_ids}
        self.command_count: dict[str, int] = {vid: 0 for vid in vehicle_ids}
        self.tick_count = 0
        # per-tick platoon-law terms and commands, for the controller log
        self.control_log: list[tuple] = []

    # -- inputs ------------------------------------------------------------

    def receive_observation(self, obs: PoseObservation) -> None:
        prev = self._latest_obs.get(obs.vehicle_id)
        if prev is not None and obs.capture_time <= prev.capture_time:
            return
        self._latest_obs[obs.vehicle_id] = obs
        est = self._estimators.get(obs.vehicle_id)
        if est is not None:
            est.add_fix(obs.capture_time, obs.x_m, obs.y_m)
        smoother = self._smoothers.get(obs.vehicle_id)
        if smoother is not None:
            smoother.speed_hint(self._last_command[obs.vehicle_id][0])
            smoother.add_fix(obs)

    def receive_cyber_states(self, records: list[dict]) -> None:
        for rec in records:
            self._cyber[rec["id"]] = rec

    # -- helpers -----------------------------------------------------------

    def _filter(self, vid: str, signal: str, sample: float, noisy: bool) -> float:
        if not noisy or self.cfg.spacing_filter_tau_s <= 0:
            return sample
        key = (vid, signal)
        lp = self._filters.get(key)
        if lp is None:
            lp = self._filters[key] = LowPass(self.cfg.spacing_filter_tau_s)
        return lp.update(sample, self.cfg.interval_s)

    def _arc_of(self, vid: str, now: float) -> tuple[float, bool] | None:
        """(arc position, vision-sourced) of any known vehicle."""
        smoother = self._smoothers.get(vid)
        if smoother is not None:
            pos = smoother.position_at(now)
            if pos is not None:
                s, _ = self.track_target.path.project(*pos)
                return s, True
        rec = self._cyber.get(vid)
        if rec is not None:
            s, _ = self.track_target.path.project(rec["x_m"], rec["y_m"])
            return s, False
        return None

    def _speed_of(self, vid: str) -> float | None:
        """Best speed knowledge: own command for managed vehicles, cyber state
        for cloud vehicles, vision estimate as a fallback."""
        if vid in self._last_command:
            return self._last_command[vid][0]
        rec = self._cyber.get(vid)
        if rec is not None:
            return rec["speed_mps"]
        est = self._estimators.get(vid)
        return est.estimate() if est is not None else None

    # -- the loop ----------------------------------------------------------

    def tick(self, now: float) -> dict[str, tuple[float, float]]:
        """Compute and dispatch one command per managed vehicle."""
        self.hub.commit_modes()
        self.tick_count += 1
        commands: dict[str, tuple[float, float]] = {}
        for vid in self.vehicle_ids:
            speed, steer = self._command_for(vid, now)
            control, speed, _ = sandbox_clamp(
                ControlInput(accel_mps2=0.0, steer_rad=steer), speed, self.params
            )
            self._last_command[vid] = (speed, control.steer_rad)
            self.hub.send(
                "workstation",
                f"plant:{vid}",
                stage=4,
                kind="command",
                payload={"speed_mps": speed, "steer_rad": control.steer_rad},
            )
            self.command_count[vid] += 1
            commands[vid] = (speed, control.steer_rad)
        return commands

    def _command_for(self, vid: str, now: float) -> tuple[float, float]:
        mode = self.hub.active_mode(vid)
        if mode is None:
            return self._last_command[vid]
        if isinstance(mode, DirectMode):
            return mode.speed_mps, mode.steer_rad

        obs = self._latest_obs.get(vid)
        if obs is None or now - obs.capture_time > STALE_OBSERVATION_S:
            if obs is not None:
                self.staleness_count[vid] += 1
            return self._last_command[vid]
        x, y = obs.x_m, obs.y_m
        smoother = self._smoothers.get(vid)
        if smoother is not None:
            pos = smoother.position_at(now)
            if pos is not None:
                x, y = pos
        pose = VehicleState(
            x_m=x, y_m=y, heading_rad=obs.heading_rad,
            speed_mps=0.0, steer_rad=0.0,
        )

        if isinstance(mode, WaypointMode):
            result = waypoint_follow(
                pose,
                list(mode.waypoints),
                self.params,
                lookahead_m=self.cfg.lookahead_m,
                cruise_speed_mps=self.cfg.cruise_speed_mps,
                curve_slowdown=self.cfg.curve_slowdown,
            )
            if result.done:
                return 0.0, 0.0
            return result.speed_mps, result.steer_rad
        if isinstance(mode, PlatoonMode):
            return self._platoon_command(vid, mode, pose, now)
        if isinstance(mode, NodeMode):  # unresolved node mode: hold
            return self._last_command[vid]
        raise TwinbedError(f"unhandled mode {mode!r}")

    def _platoon_command(
        self, vid: str, mode: PlatoonMode, pose: VehicleState, now: float
    ) -> tuple[float, float]:
        steer = preview_steer(pose, self.track_target, self.params)
        if mode.is_leader:
            speed = min(mode.profile(now), mode.v_cap_mps)
            return speed, steer

        own = self._arc_of(vid, now)
        pred = self._arc_of(mode.pred_id, now) if mode.pred_id else None
        own_v = self._speed_of(vid)
        pred_v = self._speed_of(mode.pred_id) if mode.pred_id else None
        leader_v = self._speed_of(mode.leader_id) if mode.leader_id else None
        if own is None or pred is None or None in (own_v, pred_v, leader_v):
            return self._last_command[vid]

        own_s, _ = own
        pred_s, _ = pred
        track = self.track_target.path
        spacing = self._filter(vid, "spacing", track.arc_ahead(own_s, pred_s), True)

        accel = platoon_accel(own_v, pred_v, leader_v, spacing, mode.gains, self.params)
        # integrate on the previous command: speeds in the law are command and
        # cyber values, and the vehicle tracks the commanded speed closely
        speed = self._last_command[vid][0] + accel * self.cfg.interval_s
        speed = max(0.0, min(mode.v_cap_mps, speed))
        self.control_log.append(
            (now, vid, spacing - mode.gains.s_des_m, own_v - leader_v,
             own_v - pred_v, accel, speed, steer)
        )
        return speed, steer
