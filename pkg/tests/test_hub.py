import math
import random

import pytest

from twinbed.clock import EventScheduler
from twinbed.config import NodeSection, NodesSection
from twinbed.errors import ConfigError, ModeRejected, PayloadTooLarge, UnknownDestination
from twinbed.hub import (
    CloudHub,
    DirectMode,
    ModeAssignment,
    NodeMap,
    NodeMode,
    WaypointMode,
)
from twinbed.latency import LatencyModel


def make_hub(latency=None, node_map=None, seed=0):
    scheduler = EventScheduler()
    hub = CloudHub(
        scheduler,
        latency or LatencyModel.table_defaults(),
        random.Random(seed),
        node_map=node_map,
    )
    return scheduler, hub


class TestRouting:
    def test_zero_latency_same_instant(self):
        scheduler, hub = make_hub(latency=LatencyModel.zeroed())
        got = []
        hub.register("dest", got.append)
        env = hub.send("src", "dest", stage=2, kind="ping", payload=None)
        scheduler.run_until(1.0)
        assert got == [env]
        assert env.t1 == env.t2 == env.t3 == 0.0

    def test_stage2_delivery_bounds(self):
        scheduler, hub = make_hub(seed=3)
        got = []
        hub.register("dest", got.append)
        for _ in range(500):
            hub.send("src", "dest", stage=2, kind="ping", payload=None)
        scheduler.run_until(10.0)
        assert len(got) == 500
        for env in got:
            assert env.t1 <= env.t2 <= env.t3
            delay_ms = (env.t3 - env.t1) * 1000.0
            assert 3.0 <= delay_ms <= 61.0 + 1e-9

    def test_stage3_mean_over_1200(self):
        scheduler, hub = make_hub(seed=11)
        got = []
        hub.register("dest", got.append)

        # send at a realistic 8 Hz cadence so FIFO never stretches delays
        def send(k=0):
            hub.send("src", "dest", stage=3, kind="ping", payload=None)

        for k in range(1200):
            scheduler.call_at(k * 0.125, send)
        scheduler.run_until(1200 * 0.125 + 1.0)
        mean_ms = sum((e.t3 - e.t1) for e in got) / len(got) * 1000.0
        assert len(got) == 1200
        assert abs(mean_ms - 14.7) <= 1.47

    def test_fifo_per_pair(self):
        scheduler, hub = make_hub(seed=5)
        order = []
        hub.register("dest", lambda env: order.append(env.seq))
        for _ in range(300):
            hub.send("src", "dest", stage=5, kind="ping", payload=None)
        scheduler.run_until(10.0)
        assert order == sorted(order)

    def test_conservation_exactly_once(self):
        scheduler, hub = make_hub(seed=8)
        seen = []
        hub.register("dest", lambda env: seen.append(env.seq))
        sent = [
            hub.send("src", "dest", stage=4, kind="ping", payload=None).seq
            for _ in range(200)
        ]
        scheduler.run_until(5.0)
        assert sorted(seen) == sorted(sent)
        assert len(set(seen)) == len(seen)

    def test_unknown_destination_dead_letters(self):
        _, hub = make_hub()
        with pytest.raises(UnknownDestination):
            hub.send("src", "nowhere", stage=1, kind="ping", payload=None)
        assert len(hub.dead_letters) == 1
        assert hub.dead_letters[0]["destination"] == "nowhere"
        assert hub.dead_letters[0]["reason"] == "unknown destination"

    def test_oversized_payload_rejected(self):
        _, hub = make_hub()
        hub.register("dest", lambda env: None)
        with pytest.raises(PayloadTooLarge):
            hub.send("src", "dest", stage=2, kind="blob", payload="x" * 100000)

    def test_delay_samples_recorded_per_stage(self):
        scheduler, hub = make_hub(seed=2)
        hub.register("dest", lambda env: None)
        for stage in (1, 2, 3):
            for _ in range(10):
                hub.send("src", "dest", stage=stage, kind="ping", payload=None)
        assert all(len(hub.delay_samples[s]) == 10 for s in (1, 2, 3))


@pytest.fixture
def node_map(config, track):
    return NodeMap(config.nodes, track)


class TestModes:
    def _hub_with_vehicle(self, node_map=None):
        scheduler, hub = make_hub(node_map=node_map)
        hub.register_vehicle("v1")
        return scheduler, hub

    def test_direct_mode_ack_and_activation(self):
        _, hub = self._hub_with_vehicle()
        ack = hub.assign_mode(ModeAssignment("v1", DirectMode(0.2, 0.0)))
        assert ack["ok"] and ack["mode"] == "direct"
        assert hub.active_mode("v1") is None  # not before the tick boundary
        hub.commit_modes()
        assert hub.active_mode("v1") == DirectMode(0.2, 0.0)

    def test_unknown_vehicle_rejected(self):
        _, hub = make_hub()
        with pytest.raises(ModeRejected):
            hub.assign_mode(ModeAssignment("ghost", DirectMode(0.1, 0.0)))

    def test_empty_waypoints_rejected(self):
        _, hub = self._hub_with_vehicle()
        with pytest.raises(ModeRejected):
            hub.assign_mode(ModeAssignment("v1", WaypointMode(())))

    def test_non_equidistant_waypoints_rejected(self):
        _, hub = self._hub_with_vehicle()
        # spacing varies by 20%, past the 5% tolerance
        points = ((0.0, 0.0), (1.0, 0.0), (2.2, 0.0), (3.0, 0.0))
        with pytest.raises(ModeRejected):
            hub.assign_mode(ModeAssignment("v1", WaypointMode(points)))
        assert hub.active_mode("v1") is None  # previous mode retained

    def test_equidistant_waypoints_accepted(self):
        _, hub = self._hub_with_vehicle()
        points = tuple((0.1 * k, 0.0) for k in range(10))
        hub.assign_mode(ModeAssignment("v1", WaypointMode(points)))
        hub.commit_modes()
        assert isinstance(hub.active_mode("v1"), WaypointMode)

    def test_unknown_node_rejected(self, node_map):
        _, hub = self._hub_with_vehicle(node_map)
        with pytest.raises(ModeRejected):
            hub.assign_mode(ModeAssignment("v1", NodeMode("n99")))

    def test_node_mode_resolves_to_waypoints_near_node(self, node_map, track):
        for node_id, (nx, ny) in node_map.coords.items():
            _, hub = self._hub_with_vehicle(node_map)
            x, y = track.point_at(1.3)
            hub.set_position_provider(lambda vid, x=x, y=y: (x, y))
            hub.assign_mode(ModeAssignment("v1", NodeMode(node_id)))
            hub.commit_modes()
            mode = hub.active_mode("v1")
            assert isinstance(mode, WaypointMode)
            end = mode.waypoints[-1]
            assert math.hypot(end[0] - nx, end[1] - ny) <= 0.05

    def test_mode_exclusivity(self):
        _, hub = self._hub_with_vehicle()
        hub.assign_mode(ModeAssignment("v1", DirectMode(0.2, 0.0)))
        hub.commit_modes()
        hub.assign_mode(ModeAssignment("v1", DirectMode(0.3, 0.1)))
        hub.commit_modes()
        assert hub.active_mode("v1") == DirectMode(0.3, 0.1)

    def test_release_restores_prior(self):
        _, hub = self._hub_with_vehicle()
        hub.assign_mode(ModeAssignment("v1", DirectMode(0.2, 0.0)))
        hub.commit_modes()
        hub.assign_mode(ModeAssignment("v1", DirectMode(0.9, 0.2)))
        hub.commit_modes()
        hub.release_mode("v1")
        hub.commit_modes()
        assert hub.active_mode("v1") == DirectMode(0.2, 0.0)


class TestSnapshots:
    def test_empty_system(self):
        _, hub = make_hub()
        snap = hub.snapshot_world()
        assert snap["vehicles"] == []
        assert snap["time_s"] == 0.0

    def test_five_vehicle_snapshot(self):
        _, hub = make_hub()
        records = [
            {"id": f"x{i}", "kind": "mapping" if i < 3 else "cloud",
             "x_m": 0.0, "y_m": 0.0, "heading_rad": 0.0, "speed_mps": 0.0}
            for i in range(5)
        ]
        hub.set_snapshot_provider(lambda: records)
        snap = hub.snapshot_world()
        assert len(snap["vehicles"]) == 5
        assert all(v["kind"] in ("mapping", "cloud") for v in snap["vehicles"])

    def test_snapshot_timestamps_increase(self):
        scheduler, hub = make_hub()
        hub.set_snapshot_provider(list)
        times = []
        for k in range(3):
            scheduler.call_at(k * 0.5, lambda: times.append(hub.snapshot_world()["time_s"]))
        scheduler.run_until(2.0)
        assert times == sorted(times) and len(set(times)) == 3

    def test_snapshots_batched_within_hub_tick(self):
        scheduler, hub = make_hub()
        calls = []

        def provider():
            calls.append(scheduler.clock.now)
            return []

        hub.set_snapshot_provider(provider)
        # two requests inside one 10 ms batch window combine to one view
        scheduler.call_at(0.101, lambda: hub.snapshot_world())
        scheduler.call_at(0.104, lambda: hub.snapshot_world())
        scheduler.call_at(0.125, lambda: hub.snapshot_world())
        scheduler.run_until(1.0)
        assert len(calls) == 2


class TestNodeMap:
    def test_rejects_off_lane_node(self, config, track):
        bad = NodesSection(
            nodes=[NodeSection(id="bad", x_m=4.5, y_m=2.5)], edges=[]
        )
        with pytest.raises(ConfigError):
            NodeMap(bad, track)

    def test_rejects_disconnected_graph(self, config, track):
        nodes = config.nodes.nodes[:3]
        section = NodesSection(nodes=nodes, edges=[(nodes[0].id, nodes[1].id)])
        with pytest.raises(ConfigError):
            NodeMap(section, track)

    def test_nearest_ahead(self, config, track):
        nm = NodeMap(config.nodes, track)
        # just past n01 (arc 0.0): the next node ahead is n02 at the
        # bottom-straight midpoint
        assert nm.nearest_ahead(0.05) == "n02"
