"""The four recognition stages as demand work functions.

Each stage consumes a canonical JSON payload and produces canonical JSON
result bytes, so demand signatures (stage name plus a content hash of the
payload) are stable across nodes and runs and equal inputs deduplicate.
The local composition of the four stages doubles as the oracle the
distributed batch is checked against.
"""

from __future__ import annotations

import base64
import hashlib
import json

from ..errors import SampleFormatError
from .features import DEFAULT_BINS, FeatureVector, extract_features
from .sample import Sample, load_sample, preprocess
from .training import ClassificationResult, TrainingSet, classify

STAGES = ("load", "preprocess", "extract", "classify")
SIGNATURE_HASH_LEN = 24


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def stage_signature(stage: str, payload: bytes) -> str:
    digest = hashlib.sha256(payload).hexdigest()[:SIGNATURE_HASH_LEN]
    return f"{stage}:{digest}"


# -- payload builders -------------------------------------------------------


def load_payload(sample_id: str, format: str, raw: bytes) -> bytes:
    return canonical_json({
        "sample_id": sample_id,
        "format": format,
        "data": base64.b64encode(raw).decode("ascii"),
    })


def next_payload(stage: str, result: bytes, method: str,
                 bins: int = DEFAULT_BINS) -> bytes | None:
    """Payload for the stage after `stage`, given its result bytes."""
    if stage == "load":
        return result  # preprocess consumes the loaded sample as-is
    if stage == "preprocess":
        body = json.loads(result.decode("utf-8"))
        body["method"] = method
        body["bins"] = bins
        return canonical_json(body)
    if stage == "extract":
        return result  # classify consumes the feature vector as-is
    if stage == "classify":
        return None
    raise SampleFormatError(f"unknown stage {stage!r}")


# -- stage work functions ---------------------------------------------------


def _sample_json(sample: Sample) -> bytes:
    return canonical_json({
        "sample_id": sample.id,
        "rate": sample.rate,
        "channel": sample.channel,
    })


def run_load(payload: bytes) -> bytes:
    body = json.loads(payload.decode("utf-8"))
    raw = base64.b64decode(body["data"])
    sample = load_sample(raw, body["format"], body["sample_id"])
    return _sample_json(sample)


def run_preprocess(payload: bytes) -> bytes:
    body = json.loads(payload.decode("utf-8"))
    sample = Sample(body["sample_id"], [float(v) for v in body["channel"]],
                    int(body["rate"]))
    return _sample_json(preprocess(sample))


def run_extract(payload: bytes) -> bytes:
    body = json.loads(payload.decode("utf-8"))
    sample = Sample(body["sample_id"], [float(v) for v in body["channel"]],
                    int(body["rate"]))
    vector = extract_features(sample, body["method"], int(body["bins"]))
    return canonical_json({
        "sample_id": vector.sample_id,
        "method": vector.method,
        "values": vector.values,
    })


def run_classify(payload: bytes, training_set: TrainingSet) -> bytes:
    body = json.loads(payload.decode("utf-8"))
    vector = FeatureVector(body["sample_id"], body["method"],
                           [float(v) for v in body["values"]])
    result = classify(training_set, vector)
    return canonical_json({
        "sample_id": result.sample_id,
        "speaker_id": result.speaker_id,
        "distance": result.distance,
    })


def decode_classification(result: bytes, source: str = "computed",
                          ) -> ClassificationResult:
    body = json.loads(result.decode("utf-8"))
    return ClassificationResult(body["sample_id"], body["speaker_id"],
                                float(body["distance"]), source)


def run_stage(stage: str, payload: bytes,
              training_set: TrainingSet | None = None) -> bytes:
    if stage == "load":
        return run_load(payload)
    if stage == "preprocess":
        return run_preprocess(payload)
    if stage == "extract":
        return run_extract(payload)
    if stage == "classify":
        if training_set is None:
            raise SampleFormatError("classify stage needs a training set")
        return run_classify(payload, training_set)
    raise SampleFormatError(f"unknown stage {stage!r}")


def run_stages_local(inputs: list[tuple[str, str, bytes]],
                     training_set: TrainingSet, method: str,
                     bins: int = DEFAULT_BINS) -> list[ClassificationResult]:
    """In-process composition of the four stages, one sample at a time."""
    results = []
    for sample_id, format, raw in inputs:
        payload = load_payload(sample_id, format, raw)
        for stage in STAGES:
            result = run_stage(stage, payload, training_set)
            payload = next_payload(stage, result, method, bins)
        results.append(decode_classification(result))
    return results
