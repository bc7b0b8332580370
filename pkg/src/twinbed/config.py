"""Structured run configuration: file loading, defaults, section conversion.

The YAML layout mirrors the testbed parameter tables (vehicle envelope, table
geometry, vision rates and noise, per-stage latency statistics) plus the
control gains and scenario description. Any omitted key falls back to the
defaults below, so partial files are valid.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from twinbed.errors import ConfigError
from twinbed.latency import TABLE_DEFAULTS, LatencyModel, StageDelay
from twinbed.track import SandTable, Track, default_ring
from twinbed.vehicle import Interval, VehicleParams


@dataclass
class VehicleSection:
    wheelbase_m: float = 0.15
    steer_limit_deg: tuple[float, float] = (-40.0, 40.0)
    speed_limit_mps: tuple[float, float] = (0.0, 1.0)
    accel_limit_mps2: tuple[float, float] = (-4.5, 4.5)
    body_length_m: float = 0.200
    body_width_m: float = 0.180

    def params(self) -> VehicleParams:
        lo, hi = self.steer_limit_deg
        return VehicleParams(
            wheelbase_m=self.wheelbase_m,
            steer_limit_rad=Interval(math.radians(lo), math.radians(hi)),
            speed_limit_mps=Interval(*self.speed_limit_mps),
            accel_limit_mps2=Interval(*self.accel_limit_mps2),
            body_length_m=self.body_length_m,
            body_width_m=self.body_width_m,
        )


@dataclass
class TableSection:
    width_m: float = 9.0
    height_m: float = 5.0
    lane_width_m: float = 0.240
    ring_margin_m: float = 0.5
    corner_radius_m: float = 0.5

    def track(self) -> Track:
        return default_ring(self.width_m, self.height_m, self.ring_margin_m, self.corner_radius_m)

    def sand_table(self) -> SandTable:
        return SandTable(
            width_m=self.width_m,
            height_m=self.height_m,
            lane_width_m=self.lane_width_m,
            track=self.track(),
        )


@dataclass
class VisionSection:
    capture_hz: float = 30.0
    output_every_n_frames: int = 4
    sigma_x_m: float = 0.0214
    sigma_y_m: float = 0.0187
    max_err_x_m: float = 0.041
    max_err_y_m: float = 0.043
    noise_enabled: bool = True


@dataclass
class PlantSection:
    # First-order speed-response time constant of the miniature vehicles.
    # None disables the lag, giving the idealized cloud-vehicle response.
    speed_tau_s: float | None = 0.3


@dataclass
class LatencySection:
    # stage -> {mean_ms, max_ms, min_ms, p99_ms}
    stages: dict[int, dict[str, float]] = field(
        default_factory=lambda: {
            k: {"mean_ms": m, "max_ms": mx, "min_ms": mn, "p99_ms": p}
            for k, (m, mx, mn, p) in TABLE_DEFAULTS.items()
        }
    )

    def model(self) -> LatencyModel:
        return LatencyModel({int(k): StageDelay(**v) for k, v in self.stages.items()})


@dataclass
class ControlSection:
    k_p: float = 1.4
    k_v1: float = 2.0
    k_v2: float = 1.6
    spacing_m: float = 0.5
    interval_s: float = 0.125
    lookahead_m: float = 0.3
    cruise_speed_mps: float = 0.3
    curve_slowdown: float = 0.5
    # controllers estimate speeds of vision-observed vehicles over this window
    speed_window_s: float = 0.5
    # predictor-corrector gain on observed positions (workstation side)
    position_gain: float = 0.3
    # first-order smoothing on vision-derived spacing inputs (0 disables)
    spacing_filter_tau_s: float = 0.3
    # cloud-side override; None falls back to spacing_filter_tau_s
    virtual_spacing_filter_tau_s: float | None = 1.5
    waypoint_spacing_m: float = 0.10


@dataclass
class CyberSection:
    mapping_speed_window_s: float = 0.25
    mapping_correction_max_m: float = 0.05
    mapping_correction_gain: float = 0.15
    tick_hz: float = 100.0


@dataclass
class LeaderProfileSection:
    # period detuned from the ~32 s corner-crossing interval of the default
    # ring at these speeds, so corner transients do not phase-lock with the
    # leader wave during the string-stability window
    shape: str = "sine"  # sine | square | trapezoid | constant
    v_min_mps: float = 0.10
    v_max_mps: float = 0.26
    period_s: float = 24.0

    def __post_init__(self) -> None:
        if self.shape not in ("sine", "square", "trapezoid", "constant"):
            raise ConfigError(f"unknown leader profile shape {self.shape!r}")
        if self.period_s <= 0:
            raise ConfigError("leader profile period must be positive")


@dataclass
class ScenarioSection:
    formation: list[str] = field(default_factory=lambda: ["P", "P", "V", "V", "P"])
    leader: LeaderProfileSection = field(default_factory=LeaderProfileSection)
    v_max_physical_mps: float = 0.26
    v_max_virtual_mps: float = 0.30
    duration_s: float = 300.0
    warmup_s: float = 30.0
    seed: int = 1
    start_arc_m: float = 2.5
    snapshot_hz: float = 10.0

    def __post_init__(self) -> None:
        for kind in self.formation:
            if kind not in ("P", "V"):
                raise ConfigError(f"formation entries must be 'P' or 'V', got {kind!r}")


@dataclass
class NodeSection:
    id: str
    x_m: float
    y_m: float


@dataclass
class NodesSection:
    nodes: list[NodeSection] = field(default_factory=list)
    edges: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class HubSection:
    max_payload_bytes: int = 65536
    batch_hz: float = 100.0


@dataclass
class TwinConfig:
    vehicle: VehicleSection = field(default_factory=VehicleSection)
    table: TableSection = field(default_factory=TableSection)
    vision: VisionSection = field(default_factory=VisionSection)
    plant: PlantSection = field(default_factory=PlantSection)
    latency: LatencySection = field(default_factory=LatencySection)
    control: ControlSection = field(default_factory=ControlSection)
    cyber: CyberSection = field(default_factory=CyberSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    nodes: NodesSection = field(default_factory=NodesSection)
    hub: HubSection = field(default_factory=HubSection)

    def __post_init__(self) -> None:
        if not self.nodes.nodes:
            self.nodes = default_nodes(self.table.track())
        if self.control.spacing_m <= self.vehicle.body_length_m:
            raise ConfigError("desired spacing must exceed the vehicle body length")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict | None) -> "TwinConfig":
        data = copy.deepcopy(data or {})
        try:
            return cls(
                vehicle=_section(VehicleSection, data.get("vehicle")),
                table=_section(TableSection, data.get("table")),
                vision=_section(VisionSection, data.get("vision")),
                plant=_section(PlantSection, data.get("plant")),
                latency=_latency_section(data.get("latency")),
                control=_section(ControlSection, data.get("control")),
                cyber=_section(CyberSection, data.get("cyber")),
                scenario=_scenario_section(data.get("scenario")),
                nodes=_nodes_section(data.get("nodes")),
                hub=_section(HubSection, data.get("hub")),
            )
        except TypeError as exc:
            raise ConfigError(f"bad config structure: {exc}") from exc

    @classmethod
    def default(cls) -> "TwinConfig":
        return cls()


def _section(section_cls, data):
    if data is None:
        return section_cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{section_cls.__name__} must be a mapping")
    fields = {f for f in section_cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown keys in {section_cls.__name__}: {sorted(unknown)}")
    kwargs = dict(data)
    # tuples arrive from YAML as lists
    for key in ("steer_limit_deg", "speed_limit_mps", "accel_limit_mps2"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    return section_cls(**kwargs)


def _latency_section(data) -> LatencySection:
    if data is None:
        return LatencySection()
    stages = data.get("stages", data)
    parsed = {}
    for key, value in stages.items():
        parsed[int(key)] = {
            "mean_ms": float(value["mean_ms"]),
            "max_ms": float(value["max_ms"]),
            "min_ms": float(value["min_ms"]),
            "p99_ms": float(value["p99_ms"]),
        }
    return LatencySection(stages=parsed)


def _scenario_section(data) -> ScenarioSection:
    if data is None:
        return ScenarioSection()
    data = dict(data)
    leader = data.pop("leader", None)
    section = _section(ScenarioSection, data)
    if leader is not None:
        section.leader = _section(LeaderProfileSection, leader)
    return section


def _nodes_section(data) -> NodesSection:
    if data is None:
        return NodesSection()
    nodes = [NodeSection(**n) for n in data.get("nodes", [])]
    edges = [tuple(e) for e in data.get("edges", [])]
    return NodesSection(nodes=nodes, edges=edges)


def default_nodes(track: Track) -> NodesSection:
    """Twelve calibrated nodes on the ring: corner tangent points and straight
    midpoints, connected one-way in the travel direction."""
    # anchor arc positions: straight midpoints plus corner entry/exit tangents
    from twinbed.track import _Straight  # not part of the public surface

    s = 0.0
    anchors: list[float] = []
    for seg in track._segments:
        if isinstance(seg, _Straight):
            anchors.append(s + seg.length / 2.0)
            anchors.append(s + seg.length)  # corner entry
        else:
            anchors.append(s + seg.length)  # corner exit
        s += seg.length
    anchors = sorted(a % track.length for a in anchors)
    nodes = []
    for i, arc_pos in enumerate(anchors):
        x, y = track.point_at(arc_pos)
        nodes.append(NodeSection(id=f"n{i + 1:02d}", x_m=round(x, 4), y_m=round(y, 4)))
    edges = [(nodes[i].id, nodes[(i + 1) % len(nodes)].id) for i in range(len(nodes))]
    return NodesSection(nodes=nodes, edges=edges)


def load_config(path: str | Path) -> TwinConfig:
    raw = Path(path).read_text()
    data = yaml.safe_load(raw)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return TwinConfig.from_dict(data)


def save_config(config: TwinConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config))


def dump_config(config: TwinConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=None)
