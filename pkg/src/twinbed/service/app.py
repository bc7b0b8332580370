"""FastAPI application exposing the twin over REST and websocket."""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from twinbed.archive import latency_report, read_archive, write_archive
from twinbed.config import TwinConfig
from twinbed.errors import HubError, TwinbedError
from twinbed.hub import DirectMode, ModeAssignment, NodeMode, WaypointMode
from twinbed.scenario import run_experiment
from twinbed.service import schemas
from twinbed.service.live import LiveTwin, ReplayTwin, Session
from twinbed.service.protocol import ProtocolError, decode_json, serialize_message


def create_app(
    config: TwinConfig | None = None,
    time_scale: float = 1.0,
    platoon: bool = True,
    replay_archive: str | None = None,
    replay_speed: float = 1.0,
    replay_loop: bool = False,
    tcp: tuple[str, int] | None = None,
) -> FastAPI:
    """Build the service. With replay_archive set, the app serves a recording
    on the same endpoints instead of a live run."""
    config = config or TwinConfig.default()

    if replay_archive is not None:
        twin = ReplayTwin(read_archive(Path(replay_archive)), replay_speed, replay_loop)
    else:
        twin = LiveTwin(config, time_scale=time_scale, platoon=platoon)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        await twin.start()
        tcp_server = None
        if tcp is not None:
            from twinbed.service.tcp import serve_tcp

            tcp_server = await serve_tcp(twin, tcp[0], tcp[1])
        yield
        if tcp_server is not None:
            tcp_server.close()
            await tcp_server.wait_closed()
        await twin.stop()

    app = FastAPI(title="twinbed", lifespan=lifespan)
    app.state.twin = twin
    app.state.config = config

    # -- REST ---------------------------------------------------------------

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return twin.health()

    @app.get("/snapshot", response_model=schemas.Snapshot)
    def snapshot():
        return twin.snapshot()

    @app.get("/config")
    def get_config():
        return config.to_dict()

    @app.get("/track")
    def get_track():
        track = config.table.track()
        n = max(64, int(track.length / 0.1))
        points = [track.point_at(track.length * k / n) for k in range(n + 1)]
        return {
            "table": {
                "width_m": config.table.width_m,
                "height_m": config.table.height_m,
                "lane_width_m": config.table.lane_width_m,
            },
            "centerline": points,
            "length_m": track.length,
            "nodes": [
                {"id": n_.id, "x_m": n_.x_m, "y_m": n_.y_m} for n_ in config.nodes.nodes
            ],
        }

    @app.get("/commands/log")
    def commands_log(since_wall_ms: float = 0.0):
        return [e for e in twin.command_log if e["wall_ms"] >= since_wall_ms]

    @app.get("/latency/report", response_model=schemas.LatencyReportResponse)
    def latency():
        if not isinstance(twin, LiveTwin):
            raise HTTPException(status_code=409, detail="not a live twin")
        return latency_report(twin.runner.hub.delay_samples)

    @app.post("/vehicles/{vehicle_id}/mode", response_model=schemas.ModeResponse)
    def assign_mode(vehicle_id: str, body: schemas.AssignMode):
        if not isinstance(twin, LiveTwin):
            raise HTTPException(status_code=409, detail="not a live twin")
        hub = twin.runner.hub
        try:
            if body.release:
                ack = hub.release_mode(vehicle_id)
            else:
                mode = _mode_from_schema(body)
                ack = hub.assign_mode(ModeAssignment(vehicle_id, mode))
        except HubError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.ModeResponse(
            ok=True, vehicle_id=vehicle_id, mode=ack.get("mode")
        )

    @app.post("/experiments", response_model=schemas.ExperimentResponse)
    async def experiments(body: schemas.ExperimentRequest):
        run_config = _experiment_config(config, body)
        try:
            result = await asyncio.get_running_loop().run_in_executor(
                None, run_experiment, run_config
            )
        except TwinbedError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        archive_dir = None
        if body.out_dir:
            write_archive(result, body.out_dir)
            archive_dir = str(Path(body.out_dir).resolve())
        return schemas.ExperimentResponse(
            seed=result.seed,
            archive_dir=archive_dir,
            log_sha256=result.metrics["log_sha256"],
            metrics=result.metrics,
            counters=result.counters,
        )

    # -- websocket ------------------------------------------------------------

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket):
        await ws.accept()

        async def send(message) -> None:
            await ws.send_text(serialize_message(message))

        session = Session(send=send)
        await twin.attach(session)
        try:
            while True:
                data = await ws.receive_json()
                try:
                    message = decode_json(data)
                except ProtocolError as exc:
                    await send(schemas.Ack(ok=False, detail=str(exc)))
                    continue
                await twin.handle_message(session, message)
        except WebSocketDisconnect:
            pass
        finally:
            await twin.detach(session)

    return app


def _mode_from_schema(body: schemas.AssignMode):
    if body.mode == "direct":
        if body.speed_mps is None or body.steer_rad is None:
            raise HTTPException(422, "direct mode needs speed_mps and steer_rad")
        return DirectMode(body.speed_mps, body.steer_rad)
    if body.mode == "waypoints":
        if not body.waypoints:
            raise HTTPException(422, "waypoints mode needs a waypoint list")
        return WaypointMode(tuple((x, y) for x, y in body.waypoints))
    if body.mode == "node":
        if not body.node_id:
            raise HTTPException(422, "node mode needs node_id")
        return NodeMode(body.node_id)
    raise HTTPException(422, f"unknown mode {body.mode!r}")


def _experiment_config(base: TwinConfig, body: schemas.ExperimentRequest) -> TwinConfig:
    if body.config is not None:
        data = body.config
    else:
        data = base.to_dict()
    cfg = TwinConfig.from_dict(data)
    if body.seed is not None:
        cfg.scenario.seed = body.seed
    if body.duration_s is not None:
        cfg.scenario.duration_s = body.duration_s
    return cfg
