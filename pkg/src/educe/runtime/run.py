"""Entry point shared by the CLI and the service: validate options, pick an
engine, run the workload, hand back the report."""

from __future__ import annotations

import os
import tempfile

from ..errors import ConfigError
from ..pipeline.batch import load_batch_dir, train_batch
from ..pipeline.stages import STAGES
from .config import ClusterConfig
from .options import TRANSPORT_MODES, WORKLOADS, RunOptions
from .report import RunReport
from .sim import SimulationEngine
from .threads import ThreadedEngine


def prepare_pipeline(options: RunOptions, pipeline_dir: str) -> None:
    """Load the batch directory and train the classifier at the driver,
    logging every training transaction to the WAL."""
    options.job = load_batch_dir(pipeline_dir)
    if options.wal_path is None:
        fd, path = tempfile.mkstemp(prefix="educe-train-", suffix=".wal")
        os.close(fd)
        os.unlink(path)  # the writer appends; start from an empty log
        options.wal_path = path
    options.training_set = train_batch(options.job, options.wal_path)


def validate_options(options: RunOptions) -> None:
    if options.workload not in WORKLOADS:
        raise ConfigError(f"unknown workload {options.workload!r}")
    if options.transport not in TRANSPORT_MODES:
        raise ConfigError(f"unknown transport mode {options.transport!r}")
    if options.workload == "program":
        if options.program is None or options.context is None:
            raise ConfigError("program workload needs a program and a context")
    else:
        if options.job is None or options.training_set is None:
            raise ConfigError("pipeline workload needs a prepared batch job")
    if options.crash_stage is not None:
        if options.crash_stage not in STAGES:
            raise ConfigError(f"unknown stage {options.crash_stage!r}")
        if options.workload != "pipeline":
            raise ConfigError("crash injection needs a pipeline workload")
        if options.transport == "tcp":
            raise ConfigError("crash injection runs on the simulated engines")
        if options.crash_after is not None and options.crash_after < 1:
            raise ConfigError("crash threshold must be >= 1")
    if options.slow_transport is not None and options.transport == "tcp":
        raise ConfigError("slow injection runs on the simulated engines")
    if options.slow_latency_us is not None and options.slow_latency_us < 1:
        raise ConfigError("slow latency must be >= 1 microsecond")


def run_simulation(cluster: ClusterConfig, options: RunOptions) -> RunReport:
    validate_options(options)
    if options.transport == "tcp":
        return ThreadedEngine(cluster, options).run()
    return SimulationEngine(cluster, options).run()
