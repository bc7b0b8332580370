"""Pydantic models for the wire protocol and the REST surface.

Wire messages are a tagged union on the "kind" field with exactly the kinds
the hub speaks: hello, observe, command, assign_mode, snapshot_request,
snapshot, plus ack replies.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field, TypeAdapter


class VehicleRecord(BaseModel):
    id: str
    kind: Literal["mapping", "cloud"]
    x_m: float
    y_m: float
    heading_rad: float
    speed_mps: float
    steer_rad: float = 0.0
    arc_pos_m: float | None = None


class Hello(BaseModel):
    kind: Literal["hello"] = "hello"
    role: Literal["ui", "controller", "observer"] = "observer"
    name: str = ""
    subscribe_snapshots: bool = True


class Observe(BaseModel):
    """Hub -> client: one localization fix."""

    kind: Literal["observe"] = "observe"
    vehicle_id: str
    x_m: float
    y_m: float
    heading_rad: float
    capture_time_s: float
    emit_time_s: float


class Command(BaseModel):
    """Client -> hub: direct speed/steer input for a vehicle."""

    kind: Literal["command"] = "command"
    vehicle_id: str
    speed_mps: float
    steer_rad: float


class AssignMode(BaseModel):
    kind: Literal["assign_mode"] = "assign_mode"
    vehicle_id: str
    mode: Literal["direct", "waypoints", "node"] | None = None
    speed_mps: float | None = None
    steer_rad: float | None = None
    waypoints: list[tuple[float, float]] | None = None
    node_id: str | None = None
    release: bool = False


class SnapshotRequest(BaseModel):
    kind: Literal["snapshot_request"] = "snapshot_request"


class Snapshot(BaseModel):
    kind: Literal["snapshot"] = "snapshot"
    time_s: float
    vehicles: list[VehicleRecord]


class Ack(BaseModel):
    kind: Literal["ack"] = "ack"
    ok: bool
    detail: str = ""
    vehicle_id: str | None = None


WireMessage = Annotated[
    Union[Hello, Observe, Command, AssignMode, SnapshotRequest, Snapshot, Ack],
    Field(discriminator="kind"),
]

wire_adapter: TypeAdapter = TypeAdapter(WireMessage)


# -- REST models ------------------------------------------------------------


class HealthResponse(BaseModel):
    status: str
    virtual_time_s: float
    vehicles: int


class ExperimentRequest(BaseModel):
    seed: int | None = None
    duration_s: float | None = None
    config: dict | None = None  # full config document; overrides the server's
    out_dir: str | None = None


class ExperimentResponse(BaseModel):
    seed: int
    archive_dir: str | None
    log_sha256: str
    metrics: dict
    counters: dict


class ModeResponse(BaseModel):
    ok: bool
    vehicle_id: str
    mode: str | None = None
    detail: str = ""


class LatencyReportResponse(BaseModel):
    stages: dict[int, dict]
    skipped: dict | None = None
