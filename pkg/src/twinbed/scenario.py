"""Platoon experiment harness: configuration, orchestration, and logging.

A run spawns the physical side (plants observed through the vision emulator,
commanded by the workstation over stage-4 links) and the cyber side (cloud
vehicles commanded directly through the hub, mapping vehicles mirroring the
physical ones), then drives everything on one virtual clock. The whole
pipeline is deterministic for a fixed config and seed.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field

from twinbed.clock import EventScheduler
from twinbed.config import LeaderProfileSection, TwinConfig
from twinbed.control import PathTarget, PlatoonGains, platoon_accel, preview_steer, waypoint_follow
from twinbed.cyber import CloudVehicle, MappingVehicle
from twinbed.errors import CollisionAbort, ConfigError
from twinbed.estimation import LowPass
from twinbed.hub import (
    CloudHub,
    DirectMode,
    ModeAssignment,
    NodeMap,
    PlatoonMode,
    WaypointMode,
)
from twinbed.physical import MiniatureVehicle, PoseObservation, VisionEmulator, Workstation
from twinbed.vehicle import ControlInput, VehicleState, sandbox_clamp


@dataclass
class LogRow:
    time_s: float
    vehicle_id: str
    kind: str  # "P" | "V"
    arc_pos_m: float
    speed_mps: float
    spacing_to_pred_m: float | None


@dataclass
class PlatoonLog:
    """Per-tick time series of the platoon run."""

    formation: list[tuple[str, str]]  # (vehicle_id, kind) in platoon order
    rows: list[LogRow] = field(default_factory=list)

    def vehicle_rows(self, vehicle_id: str) -> list[LogRow]:
        return [r for r in self.rows if r.vehicle_id == vehicle_id]

    def to_csv(self) -> str:
        lines = ["time_s,vehicle_id,kind,arc_pos_m,speed_mps,spacing_to_pred_m"]
        for r in self.rows:
            spacing = "" if r.spacing_to_pred_m is None else f"{r.spacing_to_pred_m:.6f}"
            lines.append(
                f"{r.time_s:.6f},{r.vehicle_id},{r.kind},{r.arc_pos_m:.6f},"
                f"{r.speed_mps:.6f},{spacing}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PlatoonLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        rows: list[LogRow] = []
        formation: list[tuple[str, str]] = []
        first_time: float | None = None
        for ln in lines[1:]:
            t, vid, kind, arc, speed, spacing = ln.split(",")
            row = LogRow(
                time_s=float(t), vehicle_id=vid, kind=kind,
                arc_pos_m=float(arc), speed_mps=float(speed),
                spacing_to_pred_m=float(spacing) if spacing else None,
            )
            rows.append(row)
            if first_time is None:
                first_time = row.time_s
            if row.time_s == first_time:
                formation.append((vid, kind))
        return cls(formation=formation, rows=rows)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()


def leader_speed(t: float, profile: LeaderProfileSection, cap_mps: float | None = None) -> float:
    """Leader speed profile value at time t, saturated to the kind's cap."""
    if t < 0:
        raise ValueError("time must be non-negative")
    lo, hi = profile.v_min_mps, profile.v_max_mps
    mid, amp = (lo + hi) / 2.0, (hi - lo) / 2.0
    u = (t / profile.period_s) % 1.0
    if profile.shape == "sine":
        v = mid + amp * math.sin(2.0 * math.pi * u)
    elif profile.shape == "square":
        v = lo if u < 0.5 else hi
    elif profile.shape == "trapezoid":
        if u < 0.25:
            v = lo + (hi - lo) * (u / 0.25)
        elif u < 0.5:
            v = hi
        elif u < 0.75:
            v = hi - (hi - lo) * ((u - 0.5) / 0.25)
        else:
            v = lo
    else:  # constant
        v = mid
    if cap_mps is not None:
        v = min(v, cap_mps)
    return max(0.0, v)


class CloudPlatoonController:
    """8 Hz controller for cloud vehicles, reading the cyber world directly."""

    def __init__(
        self,
        hub: CloudHub,
        track_target: PathTarget,
        params,
        control_cfg,
        managed_ids: list[str],
        clouds: dict[str, CloudVehicle],
        mappings: dict[str, MappingVehicle],
        initial_commands: dict[str, tuple[float, float]] | None = None,
    ):
        self.hub = hub
        self.track_target = track_target
        self.params = params
        self.cfg = control_cfg
        self.managed_ids = list(managed_ids)
        self.clouds = clouds
        self.mappings = mappings
        self._filters: dict[tuple[str, str], LowPass] = {}
        self._last_command: dict[str, tuple[float, float]] = {
            vid: (initial_commands or {}).get(vid, (0.0, 0.0)) for vid in managed_ids
        }
        # physical-side commanded speeds reported over the stage-2 link
        self._reported_speeds: dict[str, float] = {}
        self.command_count: dict[str, int] = {vid: 0 for vid in managed_ids}
        self.control_log: list[tuple] = []

    def receive_command_report(self, records: list[dict]) -> None:
        for rec in records:
            self._reported_speeds[rec["id"]] = rec["speed_mps"]

    def _filter(self, vid: str, signal: str, sample: float, noisy: bool) -> float:
        tau = self.cfg.virtual_spacing_filter_tau_s
        if tau is None:
            tau = self.cfg.spacing_filter_tau_s
        if not noisy or tau <= 0:
            return sample
        key = (vid, signal)
        lp = self._filters.get(key)
        if lp is None:
            lp = self._filters[key] = LowPass(tau)
        return lp.update(sample, self.cfg.interval_s)

    def _arc_of(self, vid: str) -> tuple[float, bool] | None:
        """(arc position, vision-derived) from cloud state or mapping mirror."""
        cloud = self.clouds.get(vid)
        if cloud is not None:
            s, _ = self.track_target.path.project(cloud.state.x_m, cloud.state.y_m)
            return s, False
        mapping = self.mappings.get(vid)
        if mapping is not None:
            s, _ = self.track_target.path.project(mapping.state.x_m, mapping.state.y_m)
            return s, True
        return None

    def _speed_of(self, vid: str) -> float | None:
        """Exact cloud speed, reported command speed, or mapping estimate."""
        cloud = self.clouds.get(vid)
        if cloud is not None:
            return cloud.state.speed_mps
        if vid in self._reported_speeds:
            return self._reported_speeds[vid]
        mapping = self.mappings.get(vid)
        return mapping.estimated_speed if mapping is not None else None

    def tick(self, now: float) -> None:
        self.hub.commit_modes()
        for vid in self.managed_ids:
            speed, steer = self._command_for(vid, now)
            control, speed, _ = sandbox_clamp(
                ControlInput(accel_mps2=0.0, steer_rad=steer), speed, self.params
            )
            self._last_command[vid] = (speed, control.steer_rad)
            self.hub.send(
                "cloud",
                f"cloud:{vid}",
                stage=5,
                kind="command",
                payload={"speed_mps": speed, "steer_rad": control.steer_rad},
            )
            self.command_count[vid] += 1

    def _command_for(self, vid: str, now: float) -> tuple[float, float]:
        mode = self.hub.active_mode(vid)
        cloud = self.clouds[vid]
        if mode is None:
            return self._last_command[vid]
        if isinstance(mode, DirectMode):
            return mode.speed_mps, mode.steer_rad
        if isinstance(mode, WaypointMode):
            result = waypoint_follow(
                cloud.state,
                list(mode.waypoints),
                self.params,
                lookahead_m=self.cfg.lookahead_m,
                cruise_speed_mps=self.cfg.cruise_speed_mps,
                curve_slowdown=self.cfg.curve_slowdown,
            )
            return (0.0, 0.0) if result.done else (result.speed_mps, result.steer_rad)
        if isinstance(mode, PlatoonMode):
            steer = preview_steer(cloud.state, self.track_target, self.params)
            if mode.is_leader:
                return min(mode.profile(now), mode.v_cap_mps), steer
            own = self._arc_of(vid)
            pred = self._arc_of(mode.pred_id) if mode.pred_id else None
            own_v = cloud.state.speed_mps  # own cloud state is exact
            pred_v = self._speed_of(mode.pred_id) if mode.pred_id else None
            leader_v = self._speed_of(mode.leader_id) if mode.leader_id else None
            if own is None or pred is None or pred_v is None or leader_v is None:
                return self._last_command[vid]
            own_s, _ = own
            pred_s, pred_noisy = pred
            track = self.track_target.path
            spacing = self._filter(
                vid, "spacing", track.arc_ahead(own_s, pred_s), pred_noisy
            )
            accel = platoon_accel(own_v, pred_v, leader_v, spacing, mode.gains, self.params)
            speed = max(0.0, min(mode.v_cap_mps, own_v + accel * self.cfg.interval_s))
            self.control_log.append(
                (now, vid, spacing - mode.gains.s_des_m, own_v - leader_v,
                 own_v - pred_v, accel, speed, steer)
            )
            return speed, steer
        return self._last_command[vid]


@dataclass
class RunResult:
    config: TwinConfig
    seed: int
    log: PlatoonLog
    delay_samples_ms: dict[int, list[float]]
    observations: list[PoseObservation]
    ground_truth: list[tuple[float, str, VehicleState]]
    snapshots: list[dict]
    dead_letters: list[dict]
    metrics: dict
    counters: dict
    control_log: list[tuple] = field(default_factory=list)
    cyber_log: list[tuple] = field(default_factory=list)


class ExperimentRunner:
    """Wires all modules for one platoon run on a shared virtual clock.

    With retain_all=False the in-memory histories are bounded, which keeps a
    continuously-served (non-batch) twin from growing without limit.
    """

    def __init__(self, config: TwinConfig, retain_all: bool = True, platoon_enabled: bool = True):
        self.config = config
        self.retain_all = retain_all
        self.platoon_enabled = platoon_enabled
        sc = config.scenario
        self.formation: list[tuple[str, str]] = [
            (f"{kind}{i}", kind) for i, kind in enumerate(sc.formation)
        ]
        self.params = config.vehicle.params()
        self.table = config.table.sand_table()
        self.track = self.table.track
        self.scheduler = EventScheduler()

        master = random.Random(sc.seed)
        self._rng_hub = random.Random(master.getrandbits(64))
        self._rng_vision = random.Random(master.getrandbits(64))
        latency = config.latency.model()

        node_map = NodeMap(config.nodes, self.track)
        self.hub = CloudHub(
            self.scheduler,
            latency,
            self._rng_hub,
            node_map=node_map,
            max_payload_bytes=config.hub.max_payload_bytes,
            max_delay_samples=None if retain_all else 100_000,
            batch_hz=config.hub.batch_hz,
        )
        self.vision = VisionEmulator(self.table, config.vision, latency, self._rng_vision)

        self.gains = PlatoonGains(
            k_p=config.control.k_p,
            k_v1=config.control.k_v1,
            k_v2=config.control.k_v2,
            s_des_m=config.control.spacing_m,
            dt_s=config.control.interval_s,
        )
        target = PathTarget(path=self.track, lookahead_m=config.control.lookahead_m)
        self.target = target

        # spawn vehicles along the track, leader first
        self.plants: dict[str, MiniatureVehicle] = {}
        self.clouds: dict[str, CloudVehicle] = {}
        self.mappings: dict[str, MappingVehicle] = {}
        v0 = leader_speed(0.0, sc.leader, None)
        for idx, (vid, kind) in enumerate(self.formation):
            s = self.track.wrap(sc.start_arc_m - idx * config.control.spacing_m)
            x, y = self.track.point_at(s)
            heading = self.track.heading_at(s)
            cap = sc.v_max_physical_mps if kind == "P" else sc.v_max_virtual_mps
            state = VehicleState(x, y, heading, min(v0, cap), 0.0)
            self.hub.register_vehicle(vid)
            if kind == "P":
                plant = MiniatureVehicle(
                    id=vid, state=state, params=self.params,
                    speed_lag_tau_s=config.plant.speed_tau_s,
                )
                plant.set_command(state.speed_mps, 0.0)
                self.plants[vid] = plant
                self.mappings[vid] = MappingVehicle(
                    vid, self.params, initial_state=state,
                    speed_window_s=config.cyber.mapping_speed_window_s,
                    correction_max_m=config.cyber.mapping_correction_max_m,
                    correction_gain=config.cyber.mapping_correction_gain,
                )
            else:
                self.clouds[vid] = CloudVehicle(vid, self.params, state)

        p_ids = [vid for vid, kind in self.formation if kind == "P"]
        v_ids = [vid for vid, kind in self.formation if kind == "V"]
        initial_commands = {
            vid: (self._truth_state(vid).speed_mps, 0.0) for vid, _ in self.formation
        }
        self.workstation = Workstation(
            self.hub, target, self.params, config.control, p_ids,
            initial_commands=initial_commands,
        )
        self.cloud_controller = CloudPlatoonController(
            self.hub, target, self.params, config.control, v_ids,
            self.clouds, self.mappings,
            initial_commands=initial_commands,
        )

        # external tap on delivered observations (the live service forwards
        # them to controller sessions as observe messages)
        self.observation_hook = None

        self._wire_endpoints()
        if platoon_enabled:
            self._install_platoon_modes()

        self.log = PlatoonLog(formation=self.formation)
        if retain_all:
            self.observations: list[PoseObservation] = []
            self.ground_truth: list[tuple[float, str, VehicleState]] = []
            self.snapshots: list[dict] = []
            self.cyber_log: list[tuple] = []
        else:
            from collections import deque

            self.log.rows = deque(maxlen=96_000)  # ~40 min at 8 Hz x 5 vehicles
            self.observations = deque(maxlen=20_000)
            self.ground_truth = deque(maxlen=48_000)
            self.snapshots = deque(maxlen=18_000)
            self.cyber_log = deque(maxlen=96_000)
            self.workstation.control_log = deque(maxlen=48_000)
            self.cloud_controller.control_log = deque(maxlen=48_000)
        self._scheduled = False

    # -- wiring ------------------------------------------------------------

    def _wire_endpoints(self) -> None:
        hub = self.hub

        def on_workstation(env) -> None:
            if env.kind == "observation":
                obs: PoseObservation = env.payload
                self.workstation.receive_observation(obs)
                # physical-side data continues to the cyber space (stage 2)
                hub.send("workstation", "cyber", stage=2, kind="observation", payload=obs)
                if self.observation_hook is not None:
                    self.observation_hook(obs)
            elif env.kind == "cyber_states":
                self.workstation.receive_cyber_states(env.payload)

        def on_cyber(env) -> None:
            if env.kind == "observation":
                obs: PoseObservation = env.payload
                mapping = self.mappings.get(obs.vehicle_id)
                if mapping is not None:
                    mapping.sync(obs)

        def on_cloud_controller(env) -> None:
            if env.kind == "command_report":
                self.cloud_controller.receive_command_report(env.payload)

        hub.register("workstation", on_workstation)
        hub.register("cyber", on_cyber)
        hub.register("cloudctl", on_cloud_controller)
        for vid, plant in self.plants.items():
            def on_plant(env, plant=plant) -> None:
                plant.set_command(env.payload["speed_mps"], env.payload["steer_rad"])

            hub.register(f"plant:{vid}", on_plant)
        for vid, cloud in self.clouds.items():
            def on_cloud(env, cloud=cloud) -> None:
                cloud.set_command(env.payload["speed_mps"], env.payload["steer_rad"])

            hub.register(f"cloud:{vid}", on_cloud)

        hub.set_snapshot_provider(self._snapshot_records)
        hub.set_position_provider(self._vehicle_position)

    def _install_platoon_modes(self) -> None:
        sc = self.config.scenario
        leader_id = self.formation[0][0] if self.formation else None
        for idx, (vid, kind) in enumerate(self.formation):
            cap = sc.v_max_physical_mps if kind == "P" else sc.v_max_virtual_mps
            if idx == 0:
                profile = sc.leader
                mode = PlatoonMode(
                    is_leader=True, v_cap_mps=cap, gains=self.gains,
                    profile=lambda t, p=profile, c=cap: leader_speed(t, p, c),
                )
            else:
                mode = PlatoonMode(
                    is_leader=False, v_cap_mps=cap, gains=self.gains,
                    pred_id=self.formation[idx - 1][0], leader_id=leader_id,
                )
            self.hub.assign_mode(ModeAssignment(vehicle_id=vid, mode=mode))
        self.hub.commit_modes()

    def _snapshot_records(self) -> list[dict]:
        records = []
        for vid, kind in self.formation:
            if kind == "P":
                state = self.mappings[vid].state
                rec_kind = "mapping"
            else:
                state = self.clouds[vid].state
                rec_kind = "cloud"
            s, _ = self.track.project(state.x_m, state.y_m)
            records.append(
                {
                    "id": vid,
                    "kind": rec_kind,
                    "x_m": state.x_m,
                    "y_m": state.y_m,
                    "heading_rad": state.heading_rad,
                    "speed_mps": state.speed_mps,
                    "steer_rad": state.steer_rad,
                    "arc_pos_m": s,
                }
            )
        return records

    def _vehicle_position(self, vid: str) -> tuple[float, float]:
        if vid in self.plants:
            st = self.plants[vid].state
        elif vid in self.clouds:
            st = self.clouds[vid].state
        else:
            raise ConfigError(f"unknown vehicle {vid!r}")
        return st.x_m, st.y_m

    def _truth_state(self, vid: str) -> VehicleState:
        return self.plants[vid].state if vid in self.plants else self.clouds[vid].state

    # -- periodic work -----------------------------------------------------

    def _plant_tick(self) -> None:
        dt = 1.0 / self.config.cyber.tick_hz
        for plant in self.plants.values():
            plant.plant_step(dt)
        for cloud in self.clouds.values():
            cloud.tick(dt)
        for mapping in self.mappings.values():
            mapping.dead_reckon(dt)

    def _vision_tick(self) -> None:
        now = self.scheduler.clock.now
        truth = {vid: plant.state for vid, plant in self.plants.items()}
        if not truth:
            self.vision.capture({}, now)
            return
        for obs in self.vision.capture(truth, now):
            self.observations.append(obs)
            self.hub.send(
                "vision", "workstation", stage=1, kind="observation",
                payload=obs, delay_s=obs.emit_time - now,
            )

    def _workstation_tick(self) -> None:
        commands = self.workstation.tick(self.scheduler.clock.now)
        if commands and self.clouds:
            report = [
                {"id": vid, "speed_mps": speed} for vid, (speed, _) in commands.items()
            ]
            self.hub.send(
                "workstation", "cloudctl", stage=2, kind="command_report", payload=report
            )

    def _cloud_tick(self) -> None:
        now = self.scheduler.clock.now
        self.cloud_controller.tick(now)
        if self.clouds and self.plants:
            records = [
                rec for rec in self._snapshot_records() if rec["kind"] == "cloud"
            ]
            self.hub.send("cloud", "workstation", stage=3, kind="cyber_states", payload=records)

    def _log_tick(self) -> None:
        now = self.scheduler.clock.now
        arcs: dict[str, float] = {}
        for rec in self._snapshot_records():
            self.cyber_log.append(
                (now, rec["id"], rec["kind"], rec["x_m"], rec["y_m"],
                 rec["heading_rad"], rec["speed_mps"])
            )
        for vid, kind in self.formation:
            state = self._truth_state(vid)
            s, _ = self.track.project(state.x_m, state.y_m)
            arcs[vid] = s
            self.ground_truth.append((now, vid, state))
        for idx, (vid, kind) in enumerate(self.formation):
            if idx == 0:
                spacing = None
            else:
                pred = self.formation[idx - 1][0]
                spacing = self.track.arc_ahead(arcs[vid], arcs[pred])
                gap = min(spacing, self.track.length - spacing)
                if gap < self.params.body_length_m:
                    raise CollisionAbort(
                        f"{vid} within {gap:.3f} m of {pred} at t={now:.3f}s"
                    )
            state = self._truth_state(vid)
            self.log.rows.append(
                LogRow(
                    time_s=now, vehicle_id=vid, kind=kind,
                    arc_pos_m=arcs[vid], speed_mps=state.speed_mps,
                    spacing_to_pred_m=spacing,
                )
            )

    def _snapshot_tick(self) -> None:
        self.snapshots.append(self.hub.snapshot_world())

    # -- run ---------------------------------------------------------------

    def schedule(self) -> None:
        """Register all periodic work; idempotent."""
        if self._scheduled:
            return
        self._scheduled = True
        sc = self.config.scenario
        control_hz = 1.0 / self.config.control.interval_s
        self.scheduler.call_every(self.config.cyber.tick_hz, self._plant_tick)
        self.scheduler.call_every(self.config.vision.capture_hz, self._vision_tick)
        self.scheduler.call_every(control_hz, self._workstation_tick)
        self.scheduler.call_every(control_hz, self._cloud_tick)
        self.scheduler.call_every(control_hz, self._log_tick)
        if sc.snapshot_hz > 0:
            self.scheduler.call_every(sc.snapshot_hz, self._snapshot_tick)

    def run(self) -> RunResult:
        sc = self.config.scenario
        self.schedule()
        self.scheduler.run_until(sc.duration_s)
        return self.collect_result()

    def collect_result(self) -> RunResult:
        from twinbed.metrics import run_metrics  # local import to avoid a cycle

        metrics = run_metrics(self.log, self.config)
        counters = {
            "captures": self.vision.capture_count,
            "vision_outputs": self.vision.emit_count,
            "commands_per_vehicle": {
                **self.workstation.command_count,
                **self.cloud_controller.command_count,
            },
            "workstation_ticks": self.workstation.tick_count,
            "staleness": dict(self.workstation.staleness_count),
            "dropped_fixes": {vid: m.dropped_count for vid, m in self.mappings.items()},
        }
        control_log = sorted(
            list(self.workstation.control_log) + list(self.cloud_controller.control_log)
        )
        return RunResult(
            config=self.config,
            seed=self.config.scenario.seed,
            log=self.log,
            delay_samples_ms={k: list(v) for k, v in self.hub.delay_samples.items()},
            observations=self.observations,
            ground_truth=self.ground_truth,
            snapshots=self.snapshots,
            dead_letters=self.hub.dead_letters,
            metrics=metrics,
            counters=counters,
            control_log=control_log,
            cyber_log=list(self.cyber_log),
        )


def run_experiment(config: TwinConfig) -> RunResult:
    """Configure and execute the full platoon pipeline once."""
    return ExperimentRunner(config).run()
