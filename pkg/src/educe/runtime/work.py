"""Demand processors shared by the simulation and the threaded cluster.

A processor takes one demand from a store client and drives it to a terminal
outcome: completed, requeued for another attempt, deferred (a replica peer is
still computing), or failed after max_attempts. Failure results carry an
error payload; the store flags and keeps the record.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import (
    DeliveryError,
    EvalError,
    FabricDownError,
    SampleFormatError,
    TrainingError,
    TransportError,
)
from ..fabric.demand import Demand
from ..lang.ast import Program
from ..pipeline.stages import run_stage
from ..pipeline.training import TrainingSet
from .intensional import DistributedEvaluator, encode_error_result

FABRIC_ERRORS = (TransportError, DeliveryError, FabricDownError)


@dataclass
class WorkCounters:
    compute: int = 0      # classifications executed locally
    replicated: int = 0   # classifications adopted from a peer store


def _fail_or_retry(client, worker_id: str, demand: Demand, max_attempts: int,
                   message: str, category: str) -> str:
    if demand.attempt >= max_attempts:
        client.complete(demand.signature, encode_error_result(message, category),
                        worker_id=worker_id, failed=True)
        return "failed"
    client.requeue_one(demand.signature, worker_id)
    return "requeued"


class IntensionalWork:
    def __init__(self, program: Program, max_attempts: int,
                 depth_limit: int, poll_fn=None):
        self.program = program
        self.max_attempts = max_attempts
        self.depth_limit = depth_limit
        self.poll_fn = poll_fn

    def process(self, client, worker_id: str, demand: Demand) -> str:
        evaluator = DistributedEvaluator(self.program, client, worker_id,
                                         self.depth_limit, self.poll_fn)
        try:
            result = evaluator.process(demand)
        except EvalError as err:
            # release any sub-demands this evaluation still holds
            for key in reversed(evaluator.outstanding_claims()):
                client.requeue_one(key, worker_id)
            return _fail_or_retry(client, worker_id, demand, self.max_attempts,
                                  str(err), err.category)
        client.complete(demand.signature, result, worker_id=worker_id)
        return "computed"


class StageWork:
    """Runs one pipeline-stage demand.

    peers lists the other stores holding the same classify demand as
    (node_id, client) pairs. Replication waits only on peers with a smaller
    node id, so exactly one store of a replica pair computes and the others
    adopt; the ordering breaks the symmetric wait that would otherwise
    deadlock two stores deferring on each other.
    """

    def __init__(self, stage: str, max_attempts: int,
                 training_set: TrainingSet | None = None,
                 replication: bool = False, peers=(), home_node: str = ""):
        self.stage = stage
        self.max_attempts = max_attempts
        self.training_set = training_set
        self.replication = replication
        self.peers = list(peers)
        self.home_node = home_node

    def process(self, client, worker_id: str, demand: Demand,
                counters: WorkCounters, check_peers: bool = True) -> str:
        if self.stage == "classify" and self.replication and check_peers:
            outcome = self._try_replicate(client, worker_id, demand, counters)
            if outcome is not None:
                return outcome
        try:
            result = run_stage(self.stage, demand.payload, self.training_set)
        except (SampleFormatError, TrainingError, ValueError, KeyError) as err:
            return _fail_or_retry(client, worker_id, demand, self.max_attempts,
                                  str(err), "stage")
        if self.stage == "classify":
            counters.compute += 1
        client.complete(demand.signature, result, worker_id=worker_id)
        return "computed"

    def _try_replicate(self, client, worker_id: str, demand: Demand,
                       counters: WorkCounters) -> str | None:
        defer = False
        for node_id, peer in self.peers:
            try:
                stored = peer.query(demand.signature)
                if stored is not None:
                    client.complete(demand.signature, stored,
                                    worker_id=worker_id, replicated=True)
                    counters.replicated += 1
                    return "replicated"
                if node_id < self.home_node and \
                        peer.demand_state(demand.signature) in ("pending", "in_process"):
                    defer = True
            except FABRIC_ERRORS:
                continue  # unreachable peer is a miss
        if defer:
            return "defer"  # caller retries this demand on a later step
        return None
