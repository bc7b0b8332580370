"""Live and replay twin sessions behind the service.

A live twin runs the full pipeline on the virtual clock, paced against wall
time (wall-to-virtual mapping: virtual_time = (wall - start) * time_scale).
Sessions attach over websocket or TCP; their messages are serialized into the
single event loop, so a live run stays deterministic for a fixed session
script. A replay twin re-emits recorded snapshots at scaled intervals.
"""

from __future__ import annotations

import asyncio
import math
import time
from dataclasses import dataclass
from typing import Awaitable, Callable

from twinbed.archive import RunArchive, replay
from twinbed.config import TwinConfig
from twinbed.errors import HubError, ModeRejected
from twinbed.hub import DirectMode, ModeAssignment, NodeMode, WaypointMode
from twinbed.scenario import ExperimentRunner
from twinbed.service import schemas

PACING_INTERVAL_S = 0.02
UI_SNAPSHOT_HZ = 20.0


@dataclass(eq=False)  # identity semantics: sessions live in sets
class Session:
    """One connected client, transport-agnostic."""

    send: Callable[[schemas.Snapshot | schemas.Ack], Awaitable[None]]
    role: str = "observer"
    name: str = ""
    subscribed: bool = False
    manual_vehicle: str | None = None


class LiveTwin:
    """Continuously running twin with attached client sessions."""

    def __init__(self, config: TwinConfig, time_scale: float = 1.0, platoon: bool = True):
        if time_scale <= 0:
            raise ValueError("time scale must be positive")
        self.config = config
        self.time_scale = time_scale
        self.runner = ExperimentRunner(config, retain_all=False, platoon_enabled=platoon)
        self.runner.schedule()
        self.runner.observation_hook = self._on_observation
        self.sessions: set[Session] = set()
        self.command_log: list[dict] = []
        self._wall_start: float | None = None
        self._last_broadcast = -math.inf
        self._task: asyncio.Task | None = None
        self._pending_observations: list[schemas.Observe] = []

    # -- lifecycle ---------------------------------------------------------

    async def start(self) -> None:
        if self._task is None:
            self._wall_start = time.monotonic()
            self._task = asyncio.create_task(self._pace())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
            self._task = None

    def _on_observation(self, obs) -> None:
        # called from inside the event loop; buffered and flushed async
        if any(s.role == "controller" for s in self.sessions):
            self._pending_observations.append(
                schemas.Observe(
                    vehicle_id=obs.vehicle_id,
                    x_m=obs.x_m,
                    y_m=obs.y_m,
                    heading_rad=obs.heading_rad,
                    capture_time_s=obs.capture_time,
                    emit_time_s=obs.emit_time,
                )
            )

    async def _pace(self) -> None:
        while True:
            target = (time.monotonic() - self._wall_start) * self.time_scale
            self.runner.scheduler.run_until(target)
            now = self.runner.scheduler.clock.now
            if now - self._last_broadcast >= 1.0 / UI_SNAPSHOT_HZ:
                self._last_broadcast = now
                await self._broadcast_snapshot()
            if self._pending_observations:
                backlog, self._pending_observations = self._pending_observations, []
                for session in list(self.sessions):
                    if session.role == "controller":
                        for message in backlog:
                            try:
                                await session.send(message)
                            except Exception:
                                await self.detach(session)
                                break
            await asyncio.sleep(PACING_INTERVAL_S)

    # -- views --------------------------------------------------------------

    @property
    def virtual_time_s(self) -> float:
        return self.runner.scheduler.clock.now

    def snapshot(self) -> schemas.Snapshot:
        raw = self.runner.hub.snapshot_world()
        return schemas.Snapshot(
            time_s=raw["time_s"],
            vehicles=[schemas.VehicleRecord(**rec) for rec in raw["vehicles"]],
        )

    def health(self) -> schemas.HealthResponse:
        return schemas.HealthResponse(
            status="live",
            virtual_time_s=self.virtual_time_s,
            vehicles=len(self.runner.formation),
        )

    # -- session handling ----------------------------------------------------

    async def attach(self, session: Session) -> None:
        self.sessions.add(session)

    async def detach(self, session: Session) -> None:
        self.sessions.discard(session)
        if session.manual_vehicle is not None:
            try:
                self.runner.hub.release_mode(session.manual_vehicle)
            except HubError:
                pass
            session.manual_vehicle = None

    async def _broadcast_snapshot(self) -> None:
        if not any(s.subscribed for s in self.sessions):
            return
        snap = self.snapshot()
        for session in list(self.sessions):
            if session.subscribed:
                try:
                    await session.send(snap)
                except Exception:
                    await self.detach(session)

    async def handle_message(self, session: Session, message) -> None:
        if isinstance(message, schemas.Hello):
            session.role = message.role
            session.name = message.name
            session.subscribed = message.subscribe_snapshots
            await session.send(schemas.Ack(ok=True, detail="hello"))
        elif isinstance(message, schemas.SnapshotRequest):
            await session.send(self.snapshot())
        elif isinstance(message, schemas.AssignMode):
            await self._assign_mode(session, message)
        elif isinstance(message, schemas.Command):
            await self._direct_command(session, message)
        else:
            await session.send(schemas.Ack(ok=False, detail="unsupported message"))

    async def _assign_mode(self, session: Session, msg: schemas.AssignMode) -> None:
        hub = self.runner.hub
        try:
            if msg.release:
                ack = hub.release_mode(msg.vehicle_id)
                if session.manual_vehicle == msg.vehicle_id:
                    session.manual_vehicle = None
            else:
                mode = self._build_mode(msg)
                ack = hub.assign_mode(ModeAssignment(msg.vehicle_id, mode))
                if isinstance(mode, DirectMode):
                    session.manual_vehicle = msg.vehicle_id
        except HubError as exc:
            await session.send(
                schemas.Ack(ok=False, detail=str(exc), vehicle_id=msg.vehicle_id)
            )
            return
        await session.send(
            schemas.Ack(ok=True, detail=str(ack.get("mode")), vehicle_id=msg.vehicle_id)
        )

    def _build_mode(self, msg: schemas.AssignMode):
        if msg.mode == "direct":
            if msg.speed_mps is None or msg.steer_rad is None:
                raise ModeRejected("direct mode needs speed_mps and steer_rad")
            return DirectMode(msg.speed_mps, msg.steer_rad)
        if msg.mode == "waypoints":
            if not msg.waypoints:
                raise ModeRejected("empty waypoint list")
            return WaypointMode(tuple((x, y) for x, y in msg.waypoints))
        if msg.mode == "node":
            if not msg.node_id:
                raise ModeRejected("node mode needs node_id")
            return NodeMode(msg.node_id)
        raise ModeRejected(f"unknown mode {msg.mode!r}")

    async def _direct_command(self, session: Session, msg: schemas.Command) -> None:
        hub = self.runner.hub
        active = hub.active_mode(msg.vehicle_id)
        pending = hub.pending_mode(msg.vehicle_id)
        under_direct = isinstance(active, DirectMode) or isinstance(pending, DirectMode)
        if not under_direct:
            await session.send(
                schemas.Ack(
                    ok=False,
                    detail="vehicle is not under direct control",
                    vehicle_id=msg.vehicle_id,
                )
            )
            return
        # audit first: the hub log is the reference for input-to-hub latency
        self.command_log.append(
            {
                "wall_ms": time.monotonic() * 1000.0,
                "virtual_s": self.virtual_time_s,
                "vehicle_id": msg.vehicle_id,
                "speed_mps": msg.speed_mps,
                "steer_rad": msg.steer_rad,
                "session": session.name,
            }
        )
        try:
            hub.assign_mode(
                ModeAssignment(msg.vehicle_id, DirectMode(msg.speed_mps, msg.steer_rad))
            )
        except HubError as exc:
            await session.send(
                schemas.Ack(ok=False, detail=str(exc), vehicle_id=msg.vehicle_id)
            )


class ReplayTwin:
    """Serves a recorded snapshot stream over the same endpoints."""

    def __init__(self, archive: RunArchive, speed_factor: float = 1.0, loop: bool = False):
        self.archive = archive
        self.speed_factor = speed_factor
        self.loop = loop
        self.sessions: set[Session] = set()
        self.command_log: list[dict] = []
        self._latest: schemas.Snapshot | None = None
        self._task: asyncio.Task | None = None
        self.finished = False

    async def start(self) -> None:
        if self._task is None:
            self._task = asyncio.create_task(self._stream())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
            self._task = None

    async def _stream(self) -> None:
        while True:
            for wait, snap in replay(self.archive, self.speed_factor):
                if wait > 0:
                    await asyncio.sleep(wait)
                model = schemas.Snapshot(
                    time_s=snap["time_s"],
                    vehicles=[schemas.VehicleRecord(**rec) for rec in snap["vehicles"]],
                )
                self._latest = model
                for session in list(self.sessions):
                    if session.subscribed:
                        try:
                            await session.send(model)
                        except Exception:
                            self.sessions.discard(session)
            if not self.loop:
                break
        self.finished = True

    @property
    def virtual_time_s(self) -> float:
        return self._latest.time_s if self._latest else 0.0

    def snapshot(self) -> schemas.Snapshot:
        return self._latest or schemas.Snapshot(time_s=0.0, vehicles=[])

    def health(self) -> schemas.HealthResponse:
        return schemas.HealthResponse(
            status="replay-finished" if self.finished else "replay",
            virtual_time_s=self.virtual_time_s,
            vehicles=len(self.snapshot().vehicles),
        )

    async def attach(self, session: Session) -> None:
        self.sessions.add(session)

    async def detach(self, session: Session) -> None:
        self.sessions.discard(session)

    async def handle_message(self, session: Session, message) -> None:
        if isinstance(message, schemas.Hello):
            session.role = message.role
            session.name = message.name
            session.subscribed = message.subscribe_snapshots
            await session.send(schemas.Ack(ok=True, detail="hello (replay)"))
            if self._latest is not None and session.subscribed:
                await session.send(self._latest)
        elif isinstance(message, schemas.SnapshotRequest):
            await session.send(self.snapshot())
        else:
            await session.send(
                schemas.Ack(ok=False, detail="replay mode accepts no control input")
            )
