"""Raw TCP transport for the wire protocol (length-prefixed JSON frames)."""

from __future__ import annotations

import asyncio

from twinbed.service import schemas
from twinbed.service.live import Session
from twinbed.service.protocol import ProtocolError, decode_frames, encode_frame


async def serve_tcp(twin, host: str, port: int) -> asyncio.AbstractServer:
    """Start a TCP listener speaking the same protocol as the websocket."""

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        async def send(message) -> None:
            writer.write(encode_frame(message))
            await writer.drain()

        session = Session(send=send)
        await twin.attach(session)
        buffer = bytearray()
        try:
            while True:
                chunk = await reader.read(4096)
                if not chunk:
                    break
                buffer.extend(chunk)
                try:
                    for message in decode_frames(buffer):
                        await twin.handle_message(session, message)
                except ProtocolError as exc:
                    await send(schemas.Ack(ok=False, detail=str(exc)))
                    break
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            await twin.detach(session)
            writer.close()

    return await asyncio.start_server(handle, host, port)
