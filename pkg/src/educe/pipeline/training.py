"""Training sets, nearest-neighbor classification, and WAL-backed recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import TrainingError
from .features import FeatureVector
from .wal import WalWriter, read_wal_file


@dataclass
class ClassificationResult:
    sample_id: str
    speaker_id: str
    distance: float
    source: str = "computed"  # computed | replicated


class TrainingSet:
    """Per-speaker feature vectors; version counts committed training
    transactions. The journal mirrors committed transactions in memory so a
    peer can hand an uncommitted tail to a recovering node."""

    def __init__(self) -> None:
        self.entries: dict[str, list[FeatureVector]] = {}
        self.version = 0
        self.method: str | None = None
        self.length: int | None = None
        self.journal: dict[int, list[tuple[str, list[float]]]] = {}

    def _check(self, vector: FeatureVector) -> None:
        if self.method is None:
            return
        if vector.method != self.method:
            raise TrainingError(
                f"method mismatch: set holds {self.method}, got {vector.method}")
        if len(vector.values) != self.length:
            raise TrainingError(
                f"vector length mismatch: set holds {self.length}, "
                f"got {len(vector.values)}")

    def _apply(self, speaker_id: str, vector: FeatureVector) -> None:
        self.entries.setdefault(speaker_id, []).append(vector)
        if self.method is None:
            self.method = vector.method
            self.length = len(vector.values)

    def size(self) -> int:
        return sum(len(vs) for vs in self.entries.values())


def train(training_set: TrainingSet, speaker_id: str, vector: FeatureVector,
          wal: WalWriter) -> int:
    """One committed transaction per call; the log reaches disk before the
    in-memory set changes."""
    training_set._check(vector)
    txn_id = training_set.version + 1
    wal.append_begin(txn_id)
    wal.append_put(txn_id, speaker_id, vector.values)
    wal.append_commit(txn_id)
    training_set._apply(speaker_id, vector)
    training_set.version = txn_id
    training_set.journal[txn_id] = [(speaker_id, list(vector.values))]
    return txn_id


def classify(training_set: TrainingSet, vector: FeatureVector) -> ClassificationResult:
    if not training_set.entries:
        raise TrainingError("empty training set")
    training_set._check(vector)
    best_speaker: str | None = None
    best_distance = math.inf
    for speaker_id in sorted(training_set.entries):
        for entry in training_set.entries[speaker_id]:
            d = math.dist(entry.values, vector.values)
            if d < best_distance:
                best_distance = d
                best_speaker = speaker_id
    return ClassificationResult(vector.sample_id, best_speaker, best_distance)


def recover(wal_path: str, method: str, replica_lookup=None) -> TrainingSet:
    """Rebuild a training set from its log: committed transactions replay in
    order, a checksum-failing tail is dropped, and an uncommitted trailing
    transaction is adopted only if a replica confirms it committed."""
    scan = read_wal_file(wal_path)
    training_set = TrainingSet()

    def apply_txn(txn_id: int, puts) -> None:
        for speaker_id, values in puts:
            training_set._apply(speaker_id,
                                FeatureVector("", method, list(values)))
        training_set.version += 1
        training_set.journal[txn_id] = [(s, list(v)) for s, v in puts]

    for txn_id, puts in scan.committed:
        apply_txn(txn_id, puts)
    if scan.tail is not None and replica_lookup is not None:
        txn_id, _ = scan.tail
        confirmed = replica_lookup(txn_id)
        if confirmed is not None:
            apply_txn(txn_id, confirmed)
    return training_set
