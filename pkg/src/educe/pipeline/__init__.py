"""Recognition pipeline: samples, features, training, WAL, stage functions."""

from .batch import BatchJob, load_batch_dir, train_batch, training_vectors
from .features import DEFAULT_BINS, METHODS, FeatureVector, extract_features, minmax, spectral
from .sample import DEFAULT_RATE, Sample, load_sample, preprocess, write_wave_stub
from .stages import (
    STAGES,
    canonical_json,
    decode_classification,
    load_payload,
    next_payload,
    run_stage,
    run_stages_local,
    stage_signature,
)
from .training import ClassificationResult, TrainingSet, classify, recover, train
from .wal import (
    OP_BEGIN,
    OP_COMMIT,
    OP_PUT,
    WalRecord,
    WalScan,
    WalWriter,
    encode_put_body,
    encode_record,
    read_wal_file,
    scan_wal,
)

__all__ = [
    "BatchJob",
    "ClassificationResult",
    "DEFAULT_BINS",
    "DEFAULT_RATE",
    "FeatureVector",
    "METHODS",
    "OP_BEGIN",
    "OP_COMMIT",
    "OP_PUT",
    "STAGES",
    "Sample",
    "TrainingSet",
    "WalRecord",
    "WalScan",
    "WalWriter",
    "canonical_json",
    "classify",
    "decode_classification",
    "encode_put_body",
    "encode_record",
    "extract_features",
    "load_batch_dir",
    "load_payload",
    "load_sample",
    "minmax",
    "next_payload",
    "preprocess",
    "read_wal_file",
    "recover",
    "run_stage",
    "run_stages_local",
    "scan_wal",
    "spectral",
    "stage_signature",
    "train",
    "train_batch",
    "training_vectors",
    "write_wave_stub",
]
