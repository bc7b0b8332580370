"""Cloud hub: message routing with measured latency, modes, and snapshots.

The hub links the physical and cyber sides. Every message travels inside an
Envelope stamped with three virtual timestamps (t1 send, t2 hub arrival,
t3 final delivery); the end-to-end delay t3 - t1 is drawn from the stage's
latency distribution. Delivery is FIFO per (source, destination) pair so the
8 Hz command stream is never reordered.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Any, Callable

import networkx as nx

from twinbed.clock import EventScheduler
from twinbed.config import NodesSection
from twinbed.errors import ConfigError, ModeRejected, PayloadTooLarge, UnknownDestination
from twinbed.latency import LatencyModel
from twinbed.track import Track, WaypointPath

WAYPOINT_SPACING_TOLERANCE = 0.05
NODE_ON_LANE_TOLERANCE = 0.02


@dataclass
class Envelope:
    """Timestamped hub message."""

    seq: int
    source: str
    destination: str
    stage: int
    kind: str
    payload: Any
    t1: float
    t2: float | None = None
    t3: float | None = None


@dataclass(frozen=True)
class DirectMode:
    speed_mps: float
    steer_rad: float

    name = "direct"


@dataclass(frozen=True)
class WaypointMode:
    waypoints: tuple[tuple[float, float], ...]

    name = "waypoints"


@dataclass(frozen=True)
class NodeMode:
    node_id: str

    name = "node"


@dataclass(frozen=True)
class PlatoonMode:
    """Harness-installed platoon membership; not assignable over the wire."""

    is_leader: bool
    v_cap_mps: float
    gains: Any = None  # control.PlatoonGains
    profile: Callable[[float], float] | None = None  # leader speed profile
    pred_id: str | None = None
    leader_id: str | None = None

    name = "platoon"


@dataclass(frozen=True)
class ModeAssignment:
    vehicle_id: str
    mode: DirectMode | WaypointMode | NodeMode | PlatoonMode


class NodeMap:
    """Calibrated divergence/merge points of the track network."""

    def __init__(self, section: NodesSection, track: Track):
        self.track = track
        self.coords: dict[str, tuple[float, float]] = {}
        self.arc_pos: dict[str, float] = {}
        for node in section.nodes:
            if node.id in self.coords:
                raise ConfigError(f"duplicate node id {node.id!r}")
            s, dist = track.project(node.x_m, node.y_m)
            if dist > NODE_ON_LANE_TOLERANCE:
                raise ConfigError(
                    f"node {node.id!r} is {dist:.3f} m off the lane centerline"
                )
            self.coords[node.id] = (node.x_m, node.y_m)
            self.arc_pos[node.id] = s
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(self.coords)
        for a, b in section.edges:
            if a not in self.coords or b not in self.coords:
                raise ConfigError(f"edge ({a}, {b}) references unknown node")
            self.graph.add_edge(a, b, weight=track.arc_ahead(self.arc_pos[a], self.arc_pos[b]))
        if self.coords and not nx.is_strongly_connected(self.graph):
            raise ConfigError("node graph must be strongly connected")

    def nearest_ahead(self, s: float) -> str:
        """Node with the smallest forward arc distance from s."""
        return min(self.arc_pos, key=lambda n: self.track.arc_ahead(s, self.arc_pos[n]))

    def path_arc_positions(self, start: str, goal: str) -> list[float]:
        nodes = nx.shortest_path(self.graph, start, goal, weight="weight")
        return [self.arc_pos[n] for n in nodes]


class CloudHub:
    """Single event loop routing envelopes between registered endpoints."""

    def __init__(
        self,
        scheduler: EventScheduler,
        latency: LatencyModel,
        rng: random.Random,
        node_map: NodeMap | None = None,
        max_payload_bytes: int = 65536,
        max_delay_samples: int | None = None,
        batch_hz: float = 100.0,
    ):
        self.scheduler = scheduler
        self.latency = latency
        self.rng = rng
        self.node_map = node_map
        self.max_payload_bytes = max_payload_bytes
        self.batch_hz = batch_hz
        self._snapshot_cache: tuple[float, dict] | None = None

        self._handlers: dict[str, Callable[[Envelope], None]] = {}
        self._seq = 0
        self._last_delivery: dict[tuple[str, str], float] = {}
        if max_delay_samples is None:
            self.delay_samples: dict[int, list[float]] = {s: [] for s in latency.stages}
        else:
            from collections import deque

            self.delay_samples = {
                s: deque(maxlen=max_delay_samples) for s in latency.stages
            }
        self.delivered: list[Envelope] = []
        self.dead_letters: list[dict] = []
        self.record_deliveries = False

        # control-mode registry
        self._active_mode: dict[str, DirectMode | WaypointMode | NodeMode] = {}
        self._pending_mode: dict[str, DirectMode | WaypointMode | NodeMode] = {}
        self._prior_mode: dict[str, DirectMode | WaypointMode | NodeMode] = {}
        self._position_provider: Callable[[str], tuple[float, float]] | None = None
        self._snapshot_provider: Callable[[], list[dict]] | None = None
        self._registered_vehicles: set[str] = set()

    # -- endpoints -------------------------------------------------------

    def register(self, endpoint: str, handler: Callable[[Envelope], None]) -> None:
        self._handlers[endpoint] = handler

    def register_vehicle(self, vehicle_id: str) -> None:
        self._registered_vehicles.add(vehicle_id)

    def set_position_provider(self, provider: Callable[[str], tuple[float, float]]) -> None:
        self._position_provider = provider

    def set_snapshot_provider(self, provider: Callable[[], list[dict]]) -> None:
        self._snapshot_provider = provider

    # -- routing ---------------------------------------------------------

    def send(
        self,
        source: str,
        destination: str,
        stage: int,
        kind: str,
        payload: Any,
        delay_s: float | None = None,
    ) -> Envelope:
        """Stamp, delay, and schedule delivery of one message.

        delay_s overrides the sampled stage delay for producers that stamp the
        emission delay themselves (the vision emulator does, so observation
        emit times and delivery times agree).
        """
        now = self.scheduler.clock.now
        self._seq += 1
        env = Envelope(
            seq=self._seq, source=source, destination=destination,
            stage=stage, kind=kind, payload=payload, t1=now,
        )
        self._check_payload(env)
        if destination not in self._handlers:
            self.dead_letters.append(
                {"t": now, "seq": env.seq, "source": source,
                 "destination": destination, "kind": kind,
                 "reason": "unknown destination"}
            )
            raise UnknownDestination(f"no endpoint registered for {destination!r}")

        if delay_s is None:
            delay_ms = self.latency.sample_ms(stage, self.rng)
            delay_s = delay_ms / 1000.0
        else:
            delay_ms = delay_s * 1000.0
        self.delay_samples[stage].append(delay_ms)
        env.t2 = now + delay_s / 2.0  # hub arrival; bookkeeping only
        deliver_at = now + delay_s
        pair = (source, destination)
        last = self._last_delivery.get(pair, -math.inf)
        deliver_at = max(deliver_at, last)  # FIFO per pair
        self._last_delivery[pair] = deliver_at
        self.scheduler.call_at(deliver_at, lambda: self._deliver(env))
        return env

    def _deliver(self, env: Envelope) -> None:
        env.t3 = self.scheduler.clock.now
        if self.record_deliveries:
            self.delivered.append(env)
        self._handlers[env.destination](env)

    def _check_payload(self, env: Envelope) -> None:
        payload = env.payload
        if isinstance(payload, (dict, list, str, bytes)):
            try:
                size = len(payload) if isinstance(payload, (str, bytes)) else len(
                    json.dumps(payload)
                )
            except (TypeError, ValueError):
                return
            if size > self.max_payload_bytes:
                raise PayloadTooLarge(
                    f"payload of {size} bytes exceeds limit {self.max_payload_bytes}"
                )

    # -- control modes ----------------------------------------------------

    def assign_mode(self, assignment: ModeAssignment) -> dict:
        """Validate and stage a mode change; it activates at the next control tick."""
        vid = assignment.vehicle_id
        if vid not in self._registered_vehicles:
            raise ModeRejected(f"unknown vehicle {vid!r}")
        mode = assignment.mode
        if isinstance(mode, WaypointMode):
            self._validate_waypoints(mode.waypoints)
        elif isinstance(mode, NodeMode):
            if self.node_map is None or mode.node_id not in self.node_map.coords:
                raise ModeRejected(f"unknown node {mode.node_id!r}")
        self._pending_mode[vid] = mode
        return {"ok": True, "vehicle_id": vid, "mode": mode.name}

    def release_mode(self, vehicle_id: str) -> dict:
        """Return the vehicle to the mode it had before the last assignment."""
        if vehicle_id not in self._registered_vehicles:
            raise ModeRejected(f"unknown vehicle {vehicle_id!r}")
        prior = self._prior_mode.get(vehicle_id)
        if prior is None:
            self._pending_mode.pop(vehicle_id, None)
            return {"ok": True, "vehicle_id": vehicle_id, "mode": None}
        self._pending_mode[vehicle_id] = prior
        return {"ok": True, "vehicle_id": vehicle_id, "mode": prior.name}

    def commit_modes(self) -> None:
        """Activate pending assignments; called at each control tick boundary.

        Node modes resolve to a waypoint path along the node graph here, using
        the vehicle's position at activation time.
        """
        for vid, mode in list(self._pending_mode.items()):
            if isinstance(mode, NodeMode):
                mode = self._resolve_node_mode(vid, mode)
            prior = self._active_mode.get(vid)
            if prior is not None:
                self._prior_mode[vid] = prior
            self._active_mode[vid] = mode
        self._pending_mode.clear()

    def active_mode(self, vehicle_id: str):
        return self._active_mode.get(vehicle_id)

    def pending_mode(self, vehicle_id: str):
        return self._pending_mode.get(vehicle_id)

    def _validate_waypoints(self, waypoints: tuple[tuple[float, float], ...]) -> None:
        if len(waypoints) == 0:
            raise ModeRejected("empty waypoint list")
        if len(waypoints) == 1:
            return
        try:
            path = WaypointPath(list(waypoints))
        except ConfigError as exc:
            raise ModeRejected(str(exc)) from exc
        spread = path.spacing_spread()
        if spread > WAYPOINT_SPACING_TOLERANCE:
            raise ModeRejected(
                f"waypoints are not equidistant: spacing varies {spread:.1%}"
            )

    def _resolve_node_mode(self, vehicle_id: str, mode: NodeMode) -> WaypointMode:
        if self.node_map is None:
            raise ModeRejected("no node map configured")
        if self._position_provider is None:
            raise ModeRejected("no vehicle position provider wired")
        x, y = self._position_provider(vehicle_id)
        track = self.node_map.track
        s0, _ = track.project(x, y)
        entry = self.node_map.nearest_ahead(s0)
        arcs = self.node_map.path_arc_positions(entry, mode.node_id)
        # forward arc distance: vehicle -> entry node -> ... -> target node
        total = track.arc_ahead(s0, arcs[0])
        for a, b in zip(arcs, arcs[1:]):
            total += track.arc_ahead(a, b)
        spacing = 0.10
        if total < spacing:
            total += track.length  # already at the node: go once around
        points = track.waypoints(s0, total, spacing)
        return WaypointMode(tuple(points))

    # -- snapshots ---------------------------------------------------------

    def snapshot_world(self) -> dict:
        """Consistent view of all vehicle records at one virtual instant.

        World state is combined once per hub batch tick: every consumer that
        asks within the same 1/batch_hz window sees the identical snapshot.
        """
        now = self.scheduler.clock.now
        boundary = math.floor(now * self.batch_hz) / self.batch_hz
        if self._snapshot_cache is None or self._snapshot_cache[0] != boundary:
            vehicles = self._snapshot_provider() if self._snapshot_provider else []
            self._snapshot_cache = (boundary, {"time_s": now, "vehicles": vehicles})
        return self._snapshot_cache[1]
