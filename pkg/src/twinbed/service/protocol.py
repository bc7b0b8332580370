"""Framing for the wire protocol.

Websocket transport carries one JSON document per message; raw TCP carries
length-prefixed JSON (4-byte big-endian length, then the UTF-8 payload).
Both speak the same message kinds.
"""

from __future__ import annotations

import json
import struct

from pydantic import ValidationError

from twinbed.service.schemas import wire_adapter

MAX_FRAME_BYTES = 1 << 20
_LEN = struct.Struct(">I")


class ProtocolError(Exception):
    pass


def parse_message(text: str | bytes):
    """Decode one JSON wire message into its pydantic model."""
    try:
        return wire_adapter.validate_json(text)
    except ValidationError as exc:
        raise ProtocolError(f"bad wire message: {exc.errors()[0].get('msg', exc)}") from exc


def serialize_message(message) -> str:
    return message.model_dump_json()


def encode_frame(message) -> bytes:
    payload = serialize_message(message).encode()
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds limit")
    return _LEN.pack(len(payload)) + payload


def decode_frames(buffer: bytearray):
    """Yield parsed messages from buffer, consuming complete frames in place."""
    while True:
        if len(buffer) < _LEN.size:
            return
        (length,) = _LEN.unpack(buffer[: _LEN.size])
        if length > MAX_FRAME_BYTES:
            raise ProtocolError(f"frame of {length} bytes exceeds limit")
        end = _LEN.size + length
        if len(buffer) < end:
            return
        payload = bytes(buffer[_LEN.size:end])
        del buffer[:end]
        yield parse_message(payload)


def decode_json(data: dict):
    """Decode an already-parsed JSON object (websocket receive_json path)."""
    try:
        return wire_adapter.validate_python(data)
    except ValidationError as exc:
        raise ProtocolError(f"bad wire message: {exc.errors()[0].get('msg', exc)}") from exc
