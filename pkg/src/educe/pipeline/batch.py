"""Batch job layout on disk.

A job directory holds samples/ with the inputs to classify, train/<speaker>/
directories with enrollment files, and an optional pipeline.json selecting
the feature method and bin count. Files ending .csv parse as the text
format, .wav as the binary stub.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from .features import DEFAULT_BINS, METHODS, FeatureVector
from .sample import load_sample, preprocess
from .features import extract_features
from .training import TrainingSet, train
from .wal import WalWriter


@dataclass
class BatchJob:
    inputs: list[tuple[str, str, bytes]] = field(default_factory=list)
    training: list[tuple[str, str, bytes]] = field(default_factory=list)
    method: str = "minmax"
    bins: int = DEFAULT_BINS


def _format_for(path: Path) -> str | None:
    if path.suffix == ".csv":
        return "csv"
    if path.suffix == ".wav":
        return "wave_stub"
    return None


def load_batch_dir(root: str) -> BatchJob:
    base = Path(root)
    if not base.is_dir():
        raise ConfigError(f"batch directory not found: {root}")
    job = BatchJob()
    options = base / "pipeline.json"
    if options.exists():
        try:
            body = json.loads(options.read_text("utf-8"))
        except (ValueError, OSError) as err:
            raise ConfigError(f"pipeline.json: {err}") from None
        job.method = body.get("method", job.method)
        job.bins = int(body.get("bins", job.bins))
    if job.method not in METHODS:
        raise ConfigError(f"unknown feature method {job.method!r}")
    if job.bins < 1:
        raise ConfigError("bins must be positive")

    samples_dir = base / "samples"
    if samples_dir.is_dir():
        for path in sorted(samples_dir.iterdir()):
            format = _format_for(path)
            if format is not None:
                job.inputs.append((path.stem, format, path.read_bytes()))
    if not job.inputs:
        raise ConfigError(f"no samples under {samples_dir}")

    train_dir = base / "train"
    if train_dir.is_dir():
        for speaker_dir in sorted(train_dir.iterdir()):
            if not speaker_dir.is_dir():
                continue
            for path in sorted(speaker_dir.iterdir()):
                format = _format_for(path)
                if format is not None:
                    job.training.append((speaker_dir.name, format,
                                         path.read_bytes()))
    if not job.training:
        raise ConfigError(f"no training data under {train_dir}")
    return job


def training_vectors(job: BatchJob) -> list[tuple[str, FeatureVector]]:
    """Enrollment vectors computed with the same stage functions the
    distributed pipeline runs."""
    vectors = []
    for index, (speaker_id, format, raw) in enumerate(job.training):
        sample = load_sample(raw, format, f"{speaker_id}#{index}")
        vector = extract_features(preprocess(sample), job.method, job.bins)
        vectors.append((speaker_id, vector))
    return vectors


def train_batch(job: BatchJob, wal_path: str) -> TrainingSet:
    training_set = TrainingSet()
    wal = WalWriter(wal_path)
    try:
        for speaker_id, vector in training_vectors(job):
            train(training_set, speaker_id, vector, wal)
    finally:
        wal.close()
    return training_set
