"""Wire codec shared by every transport.

One frame per message: a 4-byte big-endian length prefix and a UTF-8 JSON
body carrying signature, kind, attempt, and the payload in base64, plus an op
discriminator and the sending worker so one layout serves every verb. Demand
and result deliveries are acknowledged with the single byte 0x06; the other
verbs answer with a frame.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass

from ..errors import TransportError

ACK = b"\x06"
MAX_FRAME = 16 * 1024 * 1024


@dataclass(frozen=True)
class Frame:
    op: str
    signature: str = ""
    kind: str = ""
    attempt: int = 1
    payload: bytes = b""
    worker: str = ""
    failed: bool = False
    replicated: bool = False


def encode_frame(frame: Frame) -> bytes:
    body = {
        "op": frame.op,
        "signature": frame.signature,
        "kind": frame.kind,
        "attempt": frame.attempt,
        "payload": base64.b64encode(frame.payload).decode("ascii"),
    }
    if frame.worker:
        body["worker"] = frame.worker
    if frame.failed:
        body["failed"] = True
    if frame.replicated:
        body["replicated"] = True
    raw = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


def decode_body(raw: bytes) -> Frame:
    try:
        body = json.loads(raw.decode("utf-8"))
        return Frame(
            op=body["op"],
            signature=body.get("signature", ""),
            kind=body.get("kind", ""),
            attempt=int(body.get("attempt", 1)),
            payload=base64.b64decode(body.get("payload", "")),
            worker=body.get("worker", ""),
            failed=bool(body.get("failed", False)),
            replicated=bool(body.get("replicated", False)),
        )
    except (ValueError, KeyError, TypeError) as err:
        raise TransportError(f"malformed frame body: {err}") from None


def decode_frame(data: bytes) -> Frame:
    if len(data) < 4:
        raise TransportError("short frame: missing length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if len(data) != 4 + length:
        raise TransportError(f"frame length mismatch: header says {length}, "
                             f"got {len(data) - 4}")
    return decode_body(data[4:])


def read_exact(sock, n: int) -> bytes:
    """Read exactly n bytes from a socket; empty bytes on clean EOF at a
    message boundary, TransportError on a torn read."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            if got == 0:
                return b""
            raise TransportError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock) -> Frame | None:
    header = read_exact(sock, 4)
    if not header:
        return None
    (length,) = struct.unpack(">I", header)
    if length > MAX_FRAME:
        raise TransportError(f"frame of {length} bytes exceeds the limit")
    return decode_body(read_exact(sock, length))
