"""Threaded cluster over real loopback TCP.

Every store tier gets a socket server; workers and the driver run in threads,
each with its own transport and dispatcher since a pooled connection carries
one conversation at a time. No fault injection here: the simulation owns
failure semantics, this engine proves the same workloads run over the real
wire protocol.
"""

from __future__ import annotations

import json
import threading
import time

from ..errors import EduceError, WorkloadError
from ..fabric.demand import Demand, DemandKind
from ..fabric.dispatcher import Dispatcher
from ..fabric.remote import RemoteStore
from ..fabric.server import StoreTcpServer
from ..fabric.transport import TcpTransport
from ..pipeline.stages import STAGES, load_payload, next_payload, stage_signature
from ..runtime.node import Node
from .config import ClusterConfig, Tier
from .intensional import decode_result, root_demand
from .options import RunOptions
from .report import RunReport, aggregate_stats
from .work import IntensionalWork, StageWork, WorkCounters

DEADLINE_S = 30.0
IDLE_SLEEP_S = 0.001


def _poll_fn(attempt: int) -> bool:
    # wait up to ~100ms for a peer's in-flight sub-demand, then recompute
    if attempt >= 50:
        return False
    time.sleep(0.002)
    return True


class _WorkerThread(threading.Thread):
    def __init__(self, engine: "ThreadedEngine", node_id: str, worker_id: str):
        super().__init__(name=worker_id, daemon=True)
        self.engine = engine
        self.node_id = node_id
        self.worker_id = worker_id
        self.counters = WorkCounters()
        self.error: BaseException | None = None

    def run(self) -> None:
        engine = self.engine
        clients = engine.make_clients()
        try:
            while not engine.stop.is_set():
                if not self._one_round(clients):
                    time.sleep(IDLE_SLEEP_S)
        except BaseException as err:  # surfaced after join
            self.error = err
        finally:
            for client in clients.values():
                client.dispatcher.close()

    def _one_round(self, clients: dict[str, RemoteStore]) -> bool:
        worked = False
        for store_node in self.engine.store_order:
            client = clients[store_node]
            try:
                demand = client.take_pending(self.worker_id)
            except EduceError:
                continue
            if demand is None:
                continue
            self._drive(client, store_node, demand, clients)
            worked = True
        return worked

    def _drive(self, client: RemoteStore, store_node: str, demand: Demand,
               clients: dict[str, RemoteStore]) -> None:
        engine = self.engine
        defers = 0
        while not engine.stop.is_set():
            try:
                if ":" in demand.signature:
                    stage = demand.signature.split(":", 1)[0]
                    work = engine.stage_work(stage, store_node, clients)
                    outcome = work.process(client, self.worker_id, demand,
                                           self.counters,
                                           check_peers=defers < 200)
                else:
                    outcome = engine.intensional_work(_poll_fn).process(
                        client, self.worker_id, demand)
            except EduceError:
                try:
                    client.requeue_one(demand.signature, self.worker_id)
                except EduceError:
                    pass
                return
            if outcome != "defer":
                return
            defers += 1
            time.sleep(0.002)


class ThreadedEngine:
    def __init__(self, cluster: ClusterConfig, options: RunOptions):
        self.cluster = cluster
        self.options = options
        self.stop = threading.Event()
        self.nodes: dict[str, Node] = {}
        self.servers: dict[str, StoreTcpServer] = {}
        self.endpoints: dict[str, dict[str, str]] = {}
        self.store_order: list[str] = []
        self._threads: list[_WorkerThread] = []
        self._intensional: IntensionalWork | None = None

    # -- topology ----------------------------------------------------------

    def _start(self) -> None:
        for config in self.cluster.active_nodes():
            node = Node(config)
            self.nodes[config.node_id] = node
            if node.store is not None:
                server = StoreTcpServer(node.store.frontend)
                server.start()
                self.servers[config.node_id] = server
                self.endpoints[config.node_id] = {"tcp": server.endpoint}
                self.store_order.append(config.node_id)
        if not self.store_order:
            raise WorkloadError("cluster has no store tier")
        for config in self.cluster.active_nodes():
            if Tier.WORKER not in config.tiers:
                continue
            for index in range(config.worker_count):
                thread = _WorkerThread(self, config.node_id,
                                       f"{config.node_id}/w{index}")
                self._threads.append(thread)
        for thread in self._threads:
            thread.start()

    def make_clients(self) -> dict[str, RemoteStore]:
        clients = {}
        for node_id in self.store_order:
            dispatcher = Dispatcher([TcpTransport("tcp")])
            clients[node_id] = RemoteStore(dispatcher,
                                           self.endpoints[node_id])
        return clients

    def store_node_for(self, stage: str | None) -> str:
        exact = None
        generic = None
        for node_id in self.store_order:
            store = self.nodes[node_id].store
            if stage is not None and store.stage == stage and exact is None:
                exact = node_id
            if store.stage is None and generic is None:
                generic = node_id
        choice = generic if stage is None else (exact or generic)
        if choice is None:
            raise WorkloadError(f"no store available for stage {stage!r}")
        return choice

    def stage_store_nodes(self, stage: str) -> list[str]:
        exact = [node_id for node_id in self.store_order
                 if self.nodes[node_id].store.stage == stage]
        return exact or [self.store_node_for(stage)]

    # -- work units --------------------------------------------------------

    def intensional_work(self, poll_fn) -> IntensionalWork:
        return IntensionalWork(self.options.program, self.cluster.max_attempts,
                               self.options.depth_limit, poll_fn)

    def stage_work(self, stage: str, store_node: str,
                   clients: dict[str, RemoteStore]) -> StageWork:
        peers = []
        if stage == "classify" and self.options.replication:
            peers = [(node_id, clients[node_id])
                     for node_id in self.stage_store_nodes("classify")
                     if node_id != store_node]
        return StageWork(stage, self.cluster.max_attempts,
                         training_set=self.options.training_set,
                         replication=self.options.replication,
                         peers=peers, home_node=store_node)

    # -- drivers -----------------------------------------------------------

    def _run_program(self, clients: dict[str, RemoteStore]) -> list[dict]:
        options = self.options
        root = root_demand(options.program, options.context, "driver")
        client = clients[self.store_node_for(None)]
        client.issue(Demand(signature=root.signature,
                            kind=DemandKind.INTENSIONAL,
                            payload=root.payload, issuer="driver"))
        deadline = time.monotonic() + DEADLINE_S
        while time.monotonic() < deadline:
            stored = client.query(root.signature)
            if stored is not None:
                kind, body = decode_result(stored)
                if kind == "value":
                    return [{"value": body}]
                return [{"error": body.get("error", ""),
                         "category": body.get("category", "eval")}]
            time.sleep(IDLE_SLEEP_S)
        raise WorkloadError("program did not finish before the deadline")

    def _run_pipeline(self, clients: dict[str, RemoteStore]) -> list[dict]:
        job = self.options.job
        queue = list(job.inputs)
        expected = {sample_id for sample_id, _, _ in queue}
        results: dict[str, dict] = {}
        forwarded: set[str] = set()
        deadline = time.monotonic() + DEADLINE_S
        while time.monotonic() < deadline:
            if queue:
                sample_id, format, raw = queue.pop(0)
                payload = load_payload(sample_id, format, raw)
                signature = stage_signature("load", payload)
                for target in self.stage_store_nodes("load"):
                    clients[target].issue(Demand(
                        signature=signature, kind=DemandKind.PROCEDURAL,
                        payload=payload, issuer="driver"))
            self._forward(clients, forwarded)
            self._collect(clients, results)
            if not queue and set(results) == expected and self._quiescent():
                return [results[sample_id] for sample_id in sorted(results)]
            time.sleep(IDLE_SLEEP_S)
        raise WorkloadError("pipeline did not finish before the deadline")

    def _quiescent(self) -> bool:
        # replica copies must drain before the run counts as finished
        return all(self.nodes[node_id].store.store.quiescent()
                   for node_id in self.store_order)

    def _forward(self, clients: dict[str, RemoteStore],
                 forwarded: set[str]) -> None:
        job = self.options.job
        for index, stage in enumerate(STAGES[:-1]):
            next_stage = STAGES[index + 1]
            for source in self.stage_store_nodes(stage):
                for item in clients[source].computed_items():
                    if item.failed or \
                            not item.signature.startswith(stage + ":"):
                        continue
                    payload = next_payload(stage, item.result, job.method,
                                           job.bins)
                    signature = stage_signature(next_stage, payload)
                    if signature in forwarded:
                        continue
                    for target in self.stage_store_nodes(next_stage):
                        clients[target].issue(Demand(
                            signature=signature, kind=DemandKind.PROCEDURAL,
                            payload=payload, issuer="driver"))
                    forwarded.add(signature)

    def _collect(self, clients: dict[str, RemoteStore],
                 results: dict[str, dict]) -> None:
        classify_nodes = set(self.stage_store_nodes("classify"))
        for node_id in self.store_order:
            for item in clients[node_id].computed_items():
                if item.failed:
                    body = json.loads(item.payload.decode("utf-8"))
                    sample_id = body.get("sample_id")
                    if sample_id is None or sample_id in results:
                        continue
                    error = json.loads(item.result.decode("utf-8"))
                    results[sample_id] = {
                        "sample_id": sample_id, "failed": True,
                        "error": error.get("error", ""),
                        "category": error.get("category", "stage"),
                    }
                elif node_id in classify_nodes and \
                        item.signature.startswith("classify:"):
                    body = json.loads(item.result.decode("utf-8"))
                    sample_id = body["sample_id"]
                    if sample_id not in results:
                        results[sample_id] = {
                            "sample_id": sample_id,
                            "speaker_id": body["speaker_id"],
                            "distance": body["distance"],
                            "source": ("replicated" if item.replicated
                                       else "computed"),
                        }

    # -- main --------------------------------------------------------------

    def run(self) -> RunReport:
        self._start()
        clients = self.make_clients()
        try:
            if self.options.workload == "program":
                results = self._run_program(clients)
            else:
                results = self._run_pipeline(clients)
        finally:
            self.stop.set()
            for thread in self._threads:
                thread.join(timeout=5.0)
            for client in clients.values():
                client.dispatcher.close()
            for server in self.servers.values():
                server.stop()
        for thread in self._threads:
            if thread.error is not None:
                raise thread.error
        return self._build_report(results)

    def _build_report(self, results: list[dict]) -> RunReport:
        counters = aggregate_stats(
            self.nodes[node_id].store.store.stats()
            for node_id in self.store_order)
        compute = sum(t.counters.compute for t in self._threads)
        replicated = sum(t.counters.replicated for t in self._threads)
        counters["compute"] = compute
        counters["replicated"] = replicated
        transports = [{"name": "tcp",
                       "samples": None, "mean_us": None, "available": True}]
        return RunReport(
            workload=self.options.workload,
            seed=self.options.seed,
            transport="tcp",
            replication=self.options.replication,
            results=results,
            counters=counters,
            transports=transports,
            incidents=[],
            events=[],
        )
