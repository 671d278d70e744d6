"""Wire protocol: length-prefixed frames carrying a single-line JSON text
section plus appended binary blocks.

Frame layout (bit-exact, little-endian):

    [u32 payload_length] [u8 message_type] [payload ...]

The payload is one line of JSON (UTF-8, no embedded newlines) terminated
by LF, followed by raw binary blocks. The JSON's "blocks" object declares
each block's offset (relative to the start of the payload) and size.
Unknown message types are fatal protocol errors.
"""

from __future__ import annotations

import json
import socket
import struct
from dataclasses import dataclass
from typing import Optional

from .errors import ProtocolError
from .observation import ObservationFrame

PROTOCOL_VERSION = "1.0"
MAX_FRAME_BYTES = 64 * 1024 * 1024

HELLO = 1
CONFIG = 2
RESET = 3
OBS = 4
ACT = 5
EVAL_START = 6
EVAL_RESULT = 7
ERROR = 8
BYE = 9

TYPE_NAMES = {
    HELLO: "HELLO", CONFIG: "CONFIG", RESET: "RESET", OBS: "OBS",
    ACT: "ACT", EVAL_START: "EVAL_START", EVAL_RESULT: "EVAL_RESULT",
    ERROR: "ERROR", BYE: "BYE",
}


@dataclass
class Frame:
    msg_type: int
    body: dict
    blocks: dict[str, bytes]

    @property
    def type_name(self) -> str:
        return TYPE_NAMES.get(self.msg_type, f"UNKNOWN({self.msg_type})")


def encode_payload(body: dict, blocks: Optional[dict[str, bytes]] = None) -> bytes:
    """Deterministic payload encoding: sorted-key single-line JSON + LF +
    binary blocks, with offsets declared in the JSON."""
    blocks = blocks or {}
    doc = dict(body)
    try:
        return _encode_payload_inner(doc, blocks)
    except ValueError as e:
        raise ProtocolError(f"unencodable text section: {e}") from None


def _encode_payload_inner(doc: dict, blocks: dict[str, bytes]) -> bytes:
    if blocks:
        # two-pass: block table offsets depend on the JSON length
        names = sorted(blocks)
        placeholder = {n: {"offset": 0, "size": len(blocks[n])} for n in names}
        doc["blocks"] = placeholder
        while True:
            text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
            base = len(text.encode()) + 1
            offset = base
            table = {}
            for n in names:
                table[n] = {"offset": offset, "size": len(blocks[n])}
                offset += len(blocks[n])
            if table == doc["blocks"]:
                break
            doc["blocks"] = table
    else:
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    if "\n" in text:
        raise ProtocolError("JSON text section must be a single line")
    payload = text.encode() + b"\n"
    for n in sorted(blocks):
        payload += blocks[n]
    return payload


def decode_payload(payload: bytes) -> tuple[dict, dict[str, bytes]]:
    nl = payload.find(b"\n")
    if nl < 0:
        raise ProtocolError("payload missing text-section terminator")
    try:
        body = json.loads(payload[:nl].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"bad JSON text section: {e}") from None
    if not isinstance(body, dict):
        raise ProtocolError("text section must be a JSON object")
    blocks: dict[str, bytes] = {}
    for name, entry in (body.pop("blocks", None) or {}).items():
        off, size = entry["offset"], entry["size"]
        if off < nl + 1 or off + size > len(payload):
            raise ProtocolError(f"block {name!r} out of payload bounds")
        blocks[name] = payload[off:off + size]
    return body, blocks


def encode_frame(msg_type: int, body: dict,
                 blocks: Optional[dict[str, bytes]] = None) -> bytes:
    if msg_type not in TYPE_NAMES:
        raise ProtocolError(f"unknown message type {msg_type}")
    payload = encode_payload(body, blocks)
    return struct.pack("<I", len(payload)) + bytes([msg_type]) + payload


def decode_frame(data: bytes) -> tuple[Frame, int]:
    """Decode one frame from the head of `data`; returns (frame, consumed)."""
    if len(data) < 5:
        raise ProtocolError("truncated frame header")
    (length,) = struct.unpack("<I", data[:4])
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame too large ({length} bytes)")
    msg_type = data[4]
    if msg_type not in TYPE_NAMES:
        raise ProtocolError(f"unknown message type {msg_type}")
    end = 5 + length
    if len(data) < end:
        raise ProtocolError("truncated frame payload")
    body, blocks = decode_payload(data[5:end])
    return Frame(msg_type, body, blocks), end


def obs_body_and_blocks(obs: ObservationFrame, seq: int) -> tuple[dict, dict]:
    body = {"type": "obs", "seq": seq, **obs.header_fields()}
    return body, obs.binary_blocks()


def encode_obs(obs: ObservationFrame, seq: int) -> bytes:
    body, blocks = obs_body_and_blocks(obs, seq)
    return encode_frame(OBS, body, blocks)


class Connection:
    """Blocking framed connection over a socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = b""

    def send(self, msg_type: int, body: dict,
             blocks: Optional[dict[str, bytes]] = None) -> None:
        self.sock.sendall(encode_frame(msg_type, body, blocks))

    def send_raw(self, frame_bytes: bytes) -> None:
        self.sock.sendall(frame_bytes)

    def recv(self) -> Frame:
        while True:
            if len(self._buf) >= 5:
                (length,) = struct.unpack("<I", self._buf[:4])
                if length > MAX_FRAME_BYTES:
                    raise ProtocolError(f"frame too large ({length} bytes)")
                if len(self._buf) >= 5 + length:
                    frame, consumed = decode_frame(self._buf)
                    self._buf = self._buf[consumed:]
                    return frame
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("connection closed")
            self._buf += chunk

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()
