"""Feature extraction: amplitude range and a small spectral profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import TrainingError
from .sample import Sample

DEFAULT_BINS = 16
METHODS = ("minmax", "spectral")


@dataclass
class FeatureVector:
    sample_id: str
    method: str
    values: list[float] = field(default_factory=list)


def minmax(channel: list[float]) -> list[float]:
    return [min(channel), max(channel)]


def spectral(channel: list[float], bins: int = DEFAULT_BINS) -> list[float]:
    """Magnitudes of the first `bins` frequency bins over a window of
    2*bins samples (zero-padded), each divided by the window length."""
    window = 2 * bins
    x = channel[:window] + [0.0] * max(0, window - len(channel))
    out = []
    for k in range(bins):
        re = 0.0
        im = 0.0
        for n in range(window):
            angle = -2.0 * math.pi * k * n / window
            re += x[n] * math.cos(angle)
            im += x[n] * math.sin(angle)
        out.append(math.hypot(re, im) / window)
    return out


def extract_features(sample: Sample, method: str,
                     bins: int = DEFAULT_BINS) -> FeatureVector:
    if method == "minmax":
        return FeatureVector(sample.id, "minmax", minmax(sample.channel))
    if method == "spectral":
        return FeatureVector(sample.id, "spectral", spectral(sample.channel, bins))
    raise TrainingError(f"unknown feature method {method!r}")
