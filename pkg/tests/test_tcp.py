import asyncio

from twinbed.config import TwinConfig
from twinbed.service import schemas
from twinbed.service.live import LiveTwin
from twinbed.service.protocol import decode_frames, encode_frame
from twinbed.service.tcp import serve_tcp


async def _request_reply(messages, twin):
    server = await serve_tcp(twin, "127.0.0.1", 0)
    port = server.sockets[0].getsockname()[1]
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    received = []
    try:
        for msg in messages:
            writer.write(encode_frame(msg))
        await writer.drain()
        buffer = bytearray()
        while len(received) < len(messages):
            chunk = await asyncio.wait_for(reader.read(4096), timeout=5.0)
            if not chunk:
                break
            buffer.extend(chunk)
            received.extend(decode_frames(buffer))
    finally:
        writer.close()
        server.close()
        await server.wait_closed()
    return received


def test_tcp_hello_and_snapshot():
    async def scenario():
        twin = LiveTwin(TwinConfig.default(), time_scale=1.0)
        # advance some virtual time without the pacing task
        twin.runner.scheduler.run_until(1.0)
        replies = await _request_reply(
            [schemas.Hello(role="controller", subscribe_snapshots=False),
             schemas.SnapshotRequest()],
            twin,
        )
        assert isinstance(replies[0], schemas.Ack) and replies[0].ok
        assert isinstance(replies[1], schemas.Snapshot)
        assert len(replies[1].vehicles) == 5
        return True

    assert asyncio.run(scenario())


def test_tcp_mode_assignment_and_rejection():
    async def scenario():
        twin = LiveTwin(TwinConfig.default(), time_scale=1.0)
        replies = await _request_reply(
            [
                schemas.Hello(subscribe_snapshots=False),
                schemas.AssignMode(vehicle_id="V2", mode="direct",
                                   speed_mps=0.2, steer_rad=0.0),
                schemas.AssignMode(vehicle_id="ghost", mode="direct",
                                   speed_mps=0.2, steer_rad=0.0),
            ],
            twin,
        )
        assert replies[1].ok
        assert not replies[2].ok
        return True

    assert asyncio.run(scenario())


def test_tcp_garbage_frame_gets_error_ack():
    async def scenario():
        twin = LiveTwin(TwinConfig.default(), time_scale=1.0)
        server = await serve_tcp(twin, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        writer.write(len(b'{"kind": "junk"}').to_bytes(4, "big") + b'{"kind": "junk"}')
        await writer.drain()
        buffer = bytearray()
        replies = []
        while not replies:
            chunk = await asyncio.wait_for(reader.read(4096), timeout=5.0)
            if not chunk:
                break
            buffer.extend(chunk)
            replies.extend(decode_frames(buffer))
        writer.close()
        server.close()
        await server.wait_closed()
        assert replies and isinstance(replies[0], schemas.Ack) and not replies[0].ok
        return True

    assert asyncio.run(scenario())
