"""Sample loading and preprocessing.

Two formats: a one-line CSV of amplitudes and a small binary stub (magic
"MRF1", big-endian u32 count and rate, float64 amplitudes). Loading clamps
amplitudes into [-1, 1]; peak normalization is a separate step so callers can
observe the unnormalized channel.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

from ..errors import SampleFormatError

WAVE_STUB_MAGIC = b"MRF1"
DEFAULT_RATE = 8000  # the csv format carries no rate of its own


@dataclass
class Sample:
    id: str
    channel: list[float] = field(default_factory=list)
    rate: int = DEFAULT_RATE


def _clean(values: list[float], what: str) -> list[float]:
    if not values:
        raise SampleFormatError(f"{what}: empty payload")
    for v in values:
        if not math.isfinite(v):
            raise SampleFormatError(f"{what}: non-finite amplitude")
    return [min(1.0, max(-1.0, v)) for v in values]


def _load_csv(data: bytes, sample_id: str) -> Sample:
    try:
        text = data.decode("utf-8").strip()
    except UnicodeDecodeError:
        raise SampleFormatError("csv: not utf-8 text") from None
    if not text:
        raise SampleFormatError("csv: empty payload")
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise SampleFormatError("csv: malformed amplitude") from None
    return Sample(sample_id, _clean(values, "csv"), DEFAULT_RATE)


def _load_wave_stub(data: bytes, sample_id: str) -> Sample:
    if len(data) < 12 or data[:4] != WAVE_STUB_MAGIC:
        raise SampleFormatError("wave_stub: malformed header")
    count, rate = struct.unpack(">II", data[4:12])
    expected = 12 + 8 * count
    if count == 0:
        raise SampleFormatError("wave_stub: empty payload")
    if len(data) < expected:
        raise SampleFormatError("wave_stub: truncated amplitudes")
    values = list(struct.unpack(f">{count}d", data[12:expected]))
    return Sample(sample_id, _clean(values, "wave_stub"), rate)


def load_sample(data: bytes, format: str, sample_id: str = "") -> Sample:
    if format == "csv":
        return _load_csv(data, sample_id)
    if format == "wave_stub":
        return _load_wave_stub(data, sample_id)
    raise SampleFormatError(f"unknown sample format {format!r}")


def write_wave_stub(sample: Sample) -> bytes:
    header = WAVE_STUB_MAGIC + struct.pack(">II", len(sample.channel), sample.rate)
    return header + struct.pack(f">{len(sample.channel)}d", *sample.channel)


def preprocess(sample: Sample) -> Sample:
    """Peak normalization; an all-zero channel passes through unchanged."""
    peak = max(abs(v) for v in sample.channel)
    if peak == 0.0:
        return Sample(sample.id, list(sample.channel), sample.rate)
    return Sample(sample.id, [v / peak for v in sample.channel], sample.rate)
