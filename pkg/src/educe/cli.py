"""Operator entry point.

Everything runs in-process by default; --server URL turns the same
subcommands into thin HTTP clients against a running service. Exit codes:
1 parse, 2 eval, 3 context, 4 config, 5 workload failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import ValidationError

from .errors import ConfigError, EduceError, ParseError
from .service.handlers import (
    CATEGORY_EXIT_CODES,
    error_category,
    handle_eval,
    handle_simulate,
)
from .service.models import EvalRequest, SimulateRequest


class RemoteServiceError(EduceError):
    def __init__(self, message: str, category: str):
        super().__init__(message)
        self.remote_category = category


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="educe",
        description="evaluate intensional programs and simulate the "
                    "multi-tier runtime that distributes them")
    sub = parser.add_subparsers(dest="command", required=True)

    cmd = sub.add_parser("eval", help="evaluate a program at a context")
    cmd.add_argument("file", help="program source file")
    cmd.add_argument("--context", default="",
                     metavar="SPEC", help='context bindings, e.g. "t=10,x=2"')
    cmd.add_argument("--naive", action="store_true",
                     help="use the cache-free recursive evaluator")
    cmd.add_argument("--server", default=None, metavar="URL",
                     help="run against a service instead of in-process")

    cmd = sub.add_parser("simulate", help="run a workload on a cluster")
    cmd.add_argument("--cluster", default=None, metavar="FILE",
                     help="cluster config JSON (default: one node, all tiers)")
    workload = cmd.add_mutually_exclusive_group(required=True)
    workload.add_argument("--program", metavar="FILE",
                          help="program source file to evaluate")
    workload.add_argument("--pipeline", metavar="DIR",
                          help="batch directory with samples/ and train/")
    cmd.add_argument("--context", default="", metavar="SPEC")
    cmd.add_argument("--replication", choices=["on", "off"], default="off")
    cmd.add_argument("--transport", choices=["auto", "inproc", "tcp"],
                     default="auto")
    cmd.add_argument("--report", default=None, metavar="PATH",
                     help="write the JSON-lines report here")
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--crash", default=None, metavar="STAGE",
                     help="kill the store node serving STAGE mid-run")
    cmd.add_argument("--after", type=int, default=None, metavar="N_DEMANDS",
                     help="crash once the stage store enqueued N demands")
    cmd.add_argument("--slow", default=None, metavar="TRANSPORT",
                     help="inflate one transport's latency")
    cmd.add_argument("--latency", type=int, default=None, metavar="US",
                     help="injected latency in microseconds")
    cmd.add_argument("--server", default=None, metavar="URL")

    cmd = sub.add_parser("serve", help="run the HTTP service")
    cmd.add_argument("--host", default="127.0.0.1")
    cmd.add_argument("--port", type=int, default=8000)
    return parser


def _read_file(path: str, category_error) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as err:
        raise category_error(f"cannot read {path}: {err}") from None


def _post(server: str, path: str, payload: dict) -> dict:
    import httpx

    try:
        response = httpx.post(server.rstrip("/") + path, json=payload,
                              timeout=300.0)
    except httpx.HTTPError as err:
        raise ConfigError(f"cannot reach server: {err}") from None
    if response.status_code == 400:
        body = response.json()
        raise RemoteServiceError(body.get("error", "request rejected"),
                                 body.get("category", "workload"))
    response.raise_for_status()
    return response.json()


def cmd_eval(args: argparse.Namespace) -> int:
    source = _read_file(args.file,
                        lambda msg: ParseError(msg, 0, 0))
    request = EvalRequest(program=source, context=args.context,
                          naive=args.naive)
    if args.server:
        body = _post(args.server, "/eval", request.model_dump())
        value, stats = body["value"], body["stats"]
    else:
        response = handle_eval(request)
        value, stats = response.value, response.stats
    print(f"result = {value}")
    for key in sorted(stats):
        print(f"{key} = {stats[key]}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cluster = None
    if args.cluster is not None:
        text = _read_file(args.cluster, ConfigError)
        try:
            cluster = json.loads(text)
        except ValueError as err:
            raise ConfigError(f"cluster config is not valid JSON: {err}") \
                from None
    program = None
    if args.program is not None:
        program = _read_file(args.program,
                             lambda msg: ParseError(msg, 0, 0))
    request = SimulateRequest(
        cluster=cluster,
        program=program,
        pipeline_dir=args.pipeline,
        context=args.context,
        replication=args.replication == "on",
        transport=args.transport,
        seed=args.seed,
        crash_stage=args.crash,
        crash_after=args.after,
        slow_transport=args.slow,
        slow_latency_us=args.latency,
    )
    if args.server:
        lines = _post(args.server, "/simulate", request.model_dump())["lines"]
    else:
        lines = handle_simulate(request).lines
    text = "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            handle.write(text)
        _print_summary(lines)
        print(f"report written to {args.report}")
    else:
        sys.stdout.write(text)
    return 0


def _print_summary(lines: list[dict]) -> None:
    results = [line for line in lines if line.get("type") == "result"]
    counters = next((line for line in lines
                     if line.get("type") == "counters"), {})
    incidents = [line for line in lines if line.get("type") == "incident"]
    for line in results:
        if "value" in line:
            print(f"result = {line['value']}")
        elif line.get("failed"):
            print(f"{line.get('sample_id')}: failed ({line.get('error')})")
        elif "sample_id" in line:
            print(f"{line['sample_id']}: {line['speaker_id']} "
                  f"(distance {line['distance']:.6f}, {line['source']})")
        elif "error" in line:
            print(f"error ({line.get('category')}): {line['error']}")
    print(f"demands: issued={counters.get('issued', 0)} "
          f"computed={counters.get('computed', 0)} "
          f"deduplicated={counters.get('deduplicated', 0)} "
          f"requeued={counters.get('requeued', 0)}")
    if incidents:
        print(f"incidents: {len(incidents)}")


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_serve(args)
    except RemoteServiceError as err:
        print(f"error ({err.remote_category}): {err}", file=sys.stderr)
        return CATEGORY_EXIT_CODES.get(err.remote_category, 5)
    except ValidationError as err:
        print(f"error (config): {err}", file=sys.stderr)
        return CATEGORY_EXIT_CODES["config"]
    except EduceError as err:
        category = error_category(err)
        print(f"error ({category}): {err}", file=sys.stderr)
        return CATEGORY_EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
