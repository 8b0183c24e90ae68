"""Options shared by both engines and the entry points that build them."""

from __future__ import annotations

from dataclasses import dataclass

from ..engine import DEFAULT_DEPTH_LIMIT
from ..lang.ast import Program
from ..lang.context import Context
from ..pipeline.batch import BatchJob
from ..pipeline.training import TrainingSet

TRANSPORT_MODES = ("auto", "inproc", "tcp")
WORKLOADS = ("program", "pipeline")


@dataclass
class RunOptions:
    workload: str
    program: Program | None = None
    context: Context | None = None
    job: BatchJob | None = None
    training_set: TrainingSet | None = None
    wal_path: str | None = None
    replication: bool = False
    transport: str = "auto"
    seed: int = 0
    crash_stage: str | None = None
    crash_after: int | None = None
    slow_transport: str | None = None
    slow_latency_us: int | None = None
    depth_limit: int = DEFAULT_DEPTH_LIMIT
