"""Service logic, independent of HTTP so the CLI can call it in-process."""

from __future__ import annotations

import json

from ..engine import NaiveStats, execute, naive_eval
from ..errors import (
    ConfigError,
    ContextSpecError,
    EduceError,
    EvalError,
    ParseError,
    PolicyError,
    SampleFormatError,
    TrainingError,
    WalError,
)
from ..lang.context import parse_context_spec
from ..lang.parser import parse_program
from ..runtime import RunOptions, default_cluster, parse_cluster_config
from ..runtime.run import prepare_pipeline, run_simulation
from .models import EvalRequest, EvalResponse, SimulateRequest, SimulateResponse

# one exit code per error category; the service sends the category name,
# the CLI turns it into the process exit status
CATEGORY_EXIT_CODES = {
    "parse": 1,
    "eval": 2,
    "context": 3,
    "config": 4,
    "workload": 5,
}


def error_category(err: EduceError) -> str:
    if isinstance(err, ParseError):
        return "parse"
    if isinstance(err, ContextSpecError):
        return "context"
    if isinstance(err, EvalError):
        return "eval"
    if isinstance(err, (ConfigError, PolicyError, SampleFormatError,
                        TrainingError, WalError)):
        return "config"
    return "workload"


def handle_eval(request: EvalRequest) -> EvalResponse:
    program = parse_program(request.program)
    context = parse_context_spec(request.context, program)
    if request.naive:
        stats = NaiveStats()
        value = naive_eval(program.result, context, program, stats)
        stats_dict = {"id_evaluations": stats.id_evaluations,
                      "max_depth": stats.max_depth}
    else:
        value, eval_stats = execute(program, context)
        stats_dict = {
            "id_evaluations": eval_stats.id_evaluations,
            "max_depth": eval_stats.max_depth,
            "warehouse_hits": eval_stats.warehouse_hits,
            "warehouse_misses": eval_stats.warehouse_misses,
            "warehouse_stores": eval_stats.warehouse_stores,
        }
    return EvalResponse(value=value, stats=stats_dict)


def handle_simulate(request: SimulateRequest) -> SimulateResponse:
    if (request.program is None) == (request.pipeline_dir is None):
        raise ConfigError("exactly one of program or pipeline_dir is required")
    if request.cluster is None:
        cluster = default_cluster()
    else:
        cluster = parse_cluster_config(json.dumps(request.cluster))
    options = RunOptions(
        workload="program" if request.program is not None else "pipeline",
        replication=request.replication,
        transport=request.transport,
        seed=request.seed,
        crash_stage=request.crash_stage,
        crash_after=request.crash_after,
        slow_transport=request.slow_transport,
        slow_latency_us=request.slow_latency_us,
    )
    if request.program is not None:
        options.program = parse_program(request.program)
        options.context = parse_context_spec(request.context, options.program)
    else:
        prepare_pipeline(options, request.pipeline_dir)
    report = run_simulation(cluster, options)
    return SimulateResponse(lines=report.lines())
