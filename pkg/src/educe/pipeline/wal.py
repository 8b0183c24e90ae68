"""Append-only write-ahead log for training-set mutations.

Record layout, all big-endian: u32 length of everything after the length
field, u64 transaction id, u8 opcode (0 begin, 1 put, 2 commit), body, u32
CRC32 covering the record from the length field through the body. A put body
is u16 speaker-id byte length, the id bytes, u16 vector element count, then
float64 values.

The reader replays the longest valid prefix: a short read, impossible
length, or checksum mismatch ends the log at the last good record. A begin
without a commit at that point is the uncommitted tail, reported separately
so recovery can consult a replica before discarding it.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

from ..errors import WalError

OP_BEGIN = 0
OP_PUT = 1
OP_COMMIT = 2

_MAX_RECORD = 1 << 20


def encode_put_body(speaker_id: str, values: list[float]) -> bytes:
    sid = speaker_id.encode("utf-8")
    if len(sid) > 0xFFFF or len(values) > 0xFFFF:
        raise WalError("put body field too large")
    return (struct.pack(">H", len(sid)) + sid
            + struct.pack(">H", len(values))
            + struct.pack(f">{len(values)}d", *values))


def decode_put_body(body: bytes) -> tuple[str, list[float]]:
    if len(body) < 2:
        raise WalError("put body truncated")
    (sid_len,) = struct.unpack(">H", body[:2])
    rest = body[2:]
    if len(rest) < sid_len + 2:
        raise WalError("put body truncated")
    speaker_id = rest[:sid_len].decode("utf-8")
    (count,) = struct.unpack(">H", rest[sid_len:sid_len + 2])
    values_raw = rest[sid_len + 2:]
    if len(values_raw) != 8 * count:
        raise WalError("put body length mismatch")
    return speaker_id, list(struct.unpack(f">{count}d", values_raw))


def encode_record(txn_id: int, opcode: int, body: bytes = b"") -> bytes:
    length = 8 + 1 + len(body) + 4
    head = struct.pack(">IQB", length, txn_id, opcode) + body
    return head + struct.pack(">I", zlib.crc32(head) & 0xFFFFFFFF)


@dataclass
class WalRecord:
    txn_id: int
    opcode: int
    body: bytes = b""


@dataclass
class WalScan:
    committed: list[tuple[int, list[tuple[str, list[float]]]]] = field(
        default_factory=list)
    tail: tuple[int, list[tuple[str, list[float]]]] | None = None
    valid_bytes: int = 0
    truncated: bool = False


def _scan_records(data: bytes):
    """Yields (offset_after_record, WalRecord) for the valid prefix."""
    offset = 0
    while offset + 4 <= len(data):
        (length,) = struct.unpack(">I", data[offset:offset + 4])
        if length < 13 or length > _MAX_RECORD:
            return
        end = offset + 4 + length
        if end > len(data):
            return
        record = data[offset:end]
        (stored_crc,) = struct.unpack(">I", record[-4:])
        if stored_crc != zlib.crc32(record[:-4]) & 0xFFFFFFFF:
            return
        txn_id, opcode = struct.unpack(">QB", record[4:13])
        yield end, WalRecord(txn_id, opcode, record[13:-4])
        offset = end


def scan_wal(data: bytes) -> WalScan:
    scan = WalScan()
    open_txn: int | None = None
    open_puts: list[tuple[str, list[float]]] = []
    consumed = 0
    for end, record in _scan_records(data):
        if record.opcode == OP_BEGIN:
            if open_txn is not None:
                raise WalError(f"nested transaction {record.txn_id}")
            open_txn = record.txn_id
            open_puts = []
        elif record.opcode == OP_PUT:
            if open_txn is None or record.txn_id != open_txn:
                raise WalError(f"put outside transaction {record.txn_id}")
            open_puts.append(decode_put_body(record.body))
        elif record.opcode == OP_COMMIT:
            if open_txn is None or record.txn_id != open_txn:
                raise WalError(f"commit outside transaction {record.txn_id}")
            scan.committed.append((open_txn, open_puts))
            open_txn = None
            open_puts = []
        else:
            raise WalError(f"unknown opcode {record.opcode}")
        consumed = end
    scan.valid_bytes = consumed
    scan.truncated = consumed < len(data)
    if open_txn is not None:
        scan.tail = (open_txn, open_puts)
    return scan


class WalWriter:
    """Single-writer append log; every record is flushed to disk before the
    caller is allowed to mutate in-memory state."""

    def __init__(self, path: str):
        self.path = path
        self._file = open(path, "ab")

    def _append(self, record: bytes) -> None:
        try:
            self._file.write(record)
            self._file.flush()
            os.fsync(self._file.fileno())
        except (OSError, ValueError) as err:
            raise WalError(f"wal write failed: {err}") from None

    def append_begin(self, txn_id: int) -> None:
        self._append(encode_record(txn_id, OP_BEGIN))

    def append_put(self, txn_id: int, speaker_id: str,
                   values: list[float]) -> None:
        self._append(encode_record(txn_id, OP_PUT,
                                   encode_put_body(speaker_id, values)))

    def append_commit(self, txn_id: int) -> None:
        self._append(encode_record(txn_id, OP_COMMIT))

    def close(self) -> None:
        self._file.close()


def read_wal_file(path: str) -> WalScan:
    try:
        with open(path, "rb") as f:
            return scan_wal(f.read())
    except OSError as err:
        raise WalError(f"cannot read wal: {err}") from None
