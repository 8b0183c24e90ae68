"""Deterministic cluster simulation on a virtual clock.

Every node tier is an entity with a step() method; a seeded RNG picks which
entity runs next and the virtual clock advances a fixed tick per step. All
demand traffic crosses the in-process fabric as encoded frames, so the same
codec, dispatcher, and store frontends run here as on real sockets. Two runs
with the same seed and options produce the same report bytes.
"""

from __future__ import annotations

import json
import os
import random

from ..errors import (
    ConfigError,
    EduceError,
    ProtocolError,
    WorkloadError,
)
from ..fabric.demand import Demand, DemandKind
from ..fabric.dispatcher import Dispatcher
from ..fabric.remote import RemoteStore
from ..fabric.transport import InProcessNamespace, InProcessTransport, LatencyModel
from ..manager.autonomic import DOWN, HEALTHY, AutonomicManager, HealingActions
from ..manager.policy import HealthPolicy
from ..pipeline.stages import STAGES, load_payload, next_payload, stage_signature
from ..pipeline.training import recover
from .config import ClusterConfig, NodeConfig, Tier
from .intensional import decode_result, root_demand
from .node import Node
from .options import RunOptions
from .registry import Registry
from .report import RunReport, aggregate_stats
from .work import FABRIC_ERRORS, IntensionalWork, StageWork, WorkCounters

TICK_US = 100                # virtual time per scheduler step
MAX_STEPS = 600_000          # 60 simulated seconds
DEFER_LIMIT = 512            # replication waits before computing anyway
SLOW_DEFAULT_US = 5000

# base/jitter microseconds for the simulated delivery paths
SIM_TRANSPORT_PROFILES = {
    "inproc": (80, 8),
    "tcp": (400, 40),
}

_STEP_ERRORS = FABRIC_ERRORS + (WorkloadError,)


class HeartbeatAgent:
    def __init__(self, engine: "SimulationEngine", node_id: str):
        self.engine = engine
        self.owner = node_id
        self.interval_us = engine.cluster.heartbeat_ms * 1000
        self.next_due_us = 0

    def step(self) -> bool:
        if self.engine.clock_us < self.next_due_us:
            return False
        self.engine.registry.heartbeat(self.owner)
        self.next_due_us = self.engine.clock_us + self.interval_us
        return False  # bookkeeping, not workload progress


class SimWorker:
    """Two-phase worker: one step takes a demand, a later step processes it.
    The split lets other entities interleave between claim and completion,
    which is where the exactly-once guarantees earn their keep."""

    def __init__(self, engine: "SimulationEngine", node_id: str, worker_id: str):
        self.engine = engine
        self.owner = node_id
        self.worker_id = worker_id
        self.demand: Demand | None = None
        self.client: RemoteStore | None = None
        self.store_node = ""
        self.defers = 0

    def _source_node(self) -> str | None:
        node = self.engine.nodes.get(self.owner)
        if node is None:
            return None
        if node.store is not None:
            return self.owner
        try:
            return self.engine.store_node_for(node.config.stage)
        except WorkloadError:
            return None

    def step(self) -> bool:
        if self.demand is None:
            source = self._source_node()
            if source is None:
                return False
            client = self.engine.client_for(source)
            try:
                demand = client.take_pending(self.worker_id)
            except FABRIC_ERRORS:
                return False
            if demand is None:
                return False
            self.demand = demand
            self.client = client
            self.store_node = source
            self.defers = 0
            return True
        return self._process()

    def _process(self) -> bool:
        demand = self.demand
        engine = self.engine
        try:
            if ":" in demand.signature:
                stage = demand.signature.split(":", 1)[0]
                work = engine.stage_work(stage, self.store_node)
                outcome = work.process(self.client, self.worker_id, demand,
                                       engine.counters,
                                       check_peers=self.defers < DEFER_LIMIT)
            else:
                outcome = engine.intensional_work().process(
                    self.client, self.worker_id, demand)
        except FABRIC_ERRORS:
            # the store (or a sub-demand's store) went away mid-flight;
            # hand the claim back if anyone is still there to take it
            try:
                self.client.requeue_one(demand.signature, self.worker_id)
            except FABRIC_ERRORS + (ProtocolError,):
                pass
            self.demand = None
            return False
        if outcome == "defer":
            self.defers += 1
            return False
        self.demand = None
        return True


class SimForwarder:
    """Generator tier: turns each stage result into the next stage's demand,
    once per routing generation."""

    def __init__(self, engine: "SimulationEngine", node_id: str):
        self.engine = engine
        self.owner = node_id

    def step(self) -> bool:
        engine = self.engine
        node = engine.nodes.get(self.owner)
        if node is None or node.generator is None:
            return False
        generator = node.generator
        job = engine.options.job
        progressed = False
        for index, stage in enumerate(STAGES[:-1]):
            next_stage = STAGES[index + 1]
            try:
                sources = engine.stage_store_nodes(stage)
            except WorkloadError:
                continue
            for source in sources:
                try:
                    items = engine.client_for(source).computed_items()
                except _STEP_ERRORS:
                    continue
                for item in items:
                    if item.failed or not item.signature.startswith(stage + ":"):
                        continue
                    payload = next_payload(stage, item.result, job.method,
                                           job.bins)
                    signature = stage_signature(next_stage, payload)
                    generation = engine.routing_generation
                    if not generator.should_forward(generation, signature):
                        continue
                    try:
                        for target in engine.stage_store_nodes(next_stage):
                            engine.client_for(target).issue(Demand(
                                signature=signature,
                                kind=DemandKind.PROCEDURAL,
                                payload=payload, issuer=self.owner))
                        progressed = True
                    except _STEP_ERRORS:
                        # forget the mark so a later step tries again
                        generator.forwarded.discard((generation, signature))
        return progressed


class SimDriver:
    """The batch client: issues one load demand per step, collects
    classifications and failures, dedupes by sample id."""

    def __init__(self, engine: "SimulationEngine"):
        self.engine = engine
        self.owner = None  # the client outlives any node failure
        self.queue = list(engine.options.job.inputs)
        self.expected = {sample_id for sample_id, _, _ in self.queue}
        self.results: dict[str, dict] = {}
        self.done = False

    def step(self) -> bool:
        progressed = False
        if self.queue:
            sample_id, format, raw = self.queue[0]
            payload = load_payload(sample_id, format, raw)
            signature = stage_signature("load", payload)
            try:
                for target in self.engine.stage_store_nodes("load"):
                    self.engine.client_for(target).issue(Demand(
                        signature=signature, kind=DemandKind.PROCEDURAL,
                        payload=payload, issuer="driver"))
                self.queue.pop(0)
                progressed = True
            except _STEP_ERRORS:
                pass
        if self._collect():
            progressed = True
        if not self.queue and set(self.results) == self.expected:
            self.done = True
        return progressed

    def _collect(self) -> bool:
        engine = self.engine
        found = False
        try:
            classify_nodes = engine.stage_store_nodes("classify")
        except WorkloadError:
            classify_nodes = []
        for node_id in list(engine.nodes):
            node = engine.nodes.get(node_id)
            if node is None or node.store is None:
                continue
            try:
                items = engine.client_for(node_id).computed_items()
            except _STEP_ERRORS:
                continue
            for item in items:
                if item.failed:
                    body = json.loads(item.payload.decode("utf-8"))
                    sample_id = body.get("sample_id")
                    if sample_id is None or sample_id in self.results:
                        continue
                    error = json.loads(item.result.decode("utf-8"))
                    self.results[sample_id] = {
                        "sample_id": sample_id, "failed": True,
                        "error": error.get("error", ""),
                        "category": error.get("category", "stage"),
                    }
                    found = True
                elif node_id in classify_nodes and \
                        item.signature.startswith("classify:"):
                    body = json.loads(item.result.decode("utf-8"))
                    sample_id = body["sample_id"]
                    if sample_id in self.results:
                        continue
                    self.results[sample_id] = {
                        "sample_id": sample_id,
                        "speaker_id": body["speaker_id"],
                        "distance": body["distance"],
                        "source": "replicated" if item.replicated else "computed",
                    }
                    found = True
        return found


class SimProgramDriver:
    def __init__(self, engine: "SimulationEngine"):
        self.engine = engine
        self.owner = None
        options = engine.options
        self.root = root_demand(options.program, options.context, "driver")
        self.outcome: dict | None = None
        self.issued = False
        self.done = False

    def step(self) -> bool:
        engine = self.engine
        try:
            store_node = engine.store_node_for(None)
            client = engine.client_for(store_node)
            stored = client.query(self.root.signature)
            if stored is not None:
                kind, body = decode_result(stored)
                if kind == "value":
                    self.outcome = {"value": body}
                else:
                    self.outcome = {"error": body.get("error", ""),
                                    "category": body.get("category", "eval")}
                self.done = True
                return True
            if not self.issued or \
                    client.demand_state(self.root.signature) == "absent":
                client.issue(Demand(signature=self.root.signature,
                                    kind=DemandKind.INTENSIONAL,
                                    payload=self.root.payload, issuer="driver"))
                self.issued = True
                return True
        except _STEP_ERRORS:
            return False
        return False


class SimManager:
    def __init__(self, engine: "SimulationEngine", node_id: str,
                 autonomic: AutonomicManager):
        self.engine = engine
        self.owner = node_id
        self.autonomic = autonomic
        self.interval_us = engine.cluster.heartbeat_ms * 1000
        self.next_due_us = self.interval_us

    def step(self) -> bool:
        engine = self.engine
        if engine.clock_us < self.next_due_us:
            return False
        self.next_due_us = engine.clock_us + self.interval_us
        active = engine.dispatcher.active
        latency = active.measured_latency if active is not None else None
        transitions = self.autonomic.observe(latency)
        progressed = False
        for health in transitions:
            progressed = True
            if health.state == DOWN:
                engine.registry.mark_down(health.node_id)
            if health.state != HEALTHY:
                self.autonomic.heal(health)
        return progressed


class SimInjector:
    """One-shot fault: kills the store node serving a stage once that store
    has enqueued the configured number of demands."""

    def __init__(self, engine: "SimulationEngine", stage: str, after: int):
        self.engine = engine
        self.owner = None
        self.stage = stage
        self.after = after
        self.fired = False

    def step(self) -> bool:
        if self.fired:
            return False
        engine = self.engine
        try:
            target = engine.stage_store_nodes(self.stage)[0]
        except WorkloadError:
            return False
        node = engine.nodes.get(target)
        if node is None or node.store is None:
            return False
        if node.store.store.stats()["enqueued"] < self.after:
            return False
        engine.kill_node(target)
        self.fired = True
        return True


class _EngineActions(HealingActions):
    def __init__(self, engine: "SimulationEngine"):
        self.engine = engine

    def requeue_lost_node(self, node_id: str) -> int:
        engine = self.engine
        config = engine.cluster.node(node_id)
        lost_workers = [f"{node_id}/w{i}"
                        for i in range(config.worker_count * 2)]
        count = 0
        for node in engine.nodes.values():
            if node.store is None:
                continue
            for worker_id in lost_workers:
                count += node.store.store.requeue_lost(worker_id)
        return count

    def replace_node(self, node_id: str) -> tuple[str, bool]:
        engine = self.engine
        policy = engine.cluster.replacement
        standby = None
        if policy != "restart_same_node":
            for config in engine.cluster.standby_nodes():
                if config.node_id not in engine.nodes and \
                        config.node_id not in engine.activated_standbys:
                    standby = config
                    break
        if standby is not None:
            engine.activated_standbys.add(standby.node_id)
            engine.activate_node(standby, replacing=node_id, restart=False)
            return "spawn_standby", True
        if policy == "spawn_standby":
            return "spawn_standby", False  # policy demands a spare, none left
        try:
            engine.activate_node(engine.cluster.node(node_id),
                                 replacing=node_id, restart=True)
        except EduceError:
            return "restart_same_node", False
        return "restart_same_node", True

    def reselect_protocol(self) -> None:
        dispatcher = self.engine.dispatcher
        try:
            dispatcher.select_protocol()
        except EduceError:
            dispatcher.reset_availability()
            dispatcher.select_protocol()

    def scale_workers(self, node_id: str) -> bool:
        node = self.engine.nodes.get(node_id)
        if node is None or node.workers is None:
            return False
        if not node.workers.scale_to(node.workers.count + 1):
            return False
        self.engine.spawn_workers(node)
        return True


class SimulationEngine:
    def __init__(self, cluster: ClusterConfig, options: RunOptions):
        self.cluster = cluster
        self.options = options
        self.rng = random.Random(options.seed)
        self.clock_us = 0
        self.steps = 0
        self.routing_generation = 0
        self.events: list[dict] = []
        self.counters = WorkCounters()
        self.namespace = InProcessNamespace()
        self.registry = Registry(now_fn=lambda: self.clock_us)
        self.nodes: dict[str, Node] = {}
        self.entities: list = []
        self.activated_standbys: set[str] = set()
        self.training = options.training_set
        self._clients: dict[str, RemoteStore] = {}
        self._spawned: dict[str, int] = {}
        self.dispatcher = Dispatcher(self._build_transports(),
                                     on_event=self._on_fabric_event)
        self._intensional_work: IntensionalWork | None = None
        timeout_us = (cluster.heartbeat_timeout_intervals
                      * cluster.heartbeat_ms * 1000)
        self.stall_limit = max(20_000, 2 * timeout_us // TICK_US + 5_000)
        self.autonomic: AutonomicManager | None = None
        self.driver = None

    # -- construction ------------------------------------------------------

    def _build_transports(self) -> list[InProcessTransport]:
        names = ["inproc"] if self.options.transport == "inproc" \
            else ["inproc", "tcp"]
        agents = []
        for index, name in enumerate(names):
            base, jitter = SIM_TRANSPORT_PROFILES[name]
            model = LatencyModel(base, jitter, self.options.seed + index)
            agents.append(InProcessTransport(self.namespace, name, model))
        slow = self.options.slow_transport
        if slow is not None:
            for agent in agents:
                if agent.name == slow:
                    agent.latency_model.set_base(
                        self.options.slow_latency_us or SLOW_DEFAULT_US)
                    break
            else:
                raise ConfigError(
                    f"cannot slow unknown transport {slow!r}")
        return agents

    def _on_fabric_event(self, event: dict) -> None:
        self.events.append(dict(event))

    def _install_node(self, config: NodeConfig) -> Node:
        node = Node(config)
        self.nodes[config.node_id] = node
        self.registry.register_node(config)
        for tier in sorted(config.tiers, key=lambda t: t.value):
            self.registry.allocate_tier(config.node_id, tier)
        self.registry.mark_running(config.node_id)
        if node.store is not None:
            self.namespace.register(config.node_id, node.store.frontend.handle)
        self.entities.append(HeartbeatAgent(self, config.node_id))
        if node.workers is not None:
            self.spawn_workers(node)
        if node.generator is not None and self.options.workload == "pipeline":
            self.entities.append(SimForwarder(self, config.node_id))
        return node

    def spawn_workers(self, node: Node) -> None:
        start = self._spawned.get(node.node_id, 0)
        for index in range(start, node.workers.count):
            self.entities.append(SimWorker(self, node.node_id,
                                           f"{node.node_id}/w{index}"))
        self._spawned[node.node_id] = node.workers.count

    def _start(self) -> None:
        for config in self.cluster.active_nodes():
            self._install_node(config)
        manager_node = next(c.node_id for c in self.cluster.active_nodes()
                            if Tier.MANAGER in c.tiers)
        policy = HealthPolicy(self.cluster.heartbeat_timeout_intervals,
                              self.cluster.latency_degraded_us,
                              self.cluster.replacement)
        self.autonomic = AutonomicManager(self.registry, policy,
                                          self.cluster.heartbeat_ms * 1000,
                                          _EngineActions(self))
        self.entities.append(SimManager(self, manager_node, self.autonomic))
        if self.options.workload == "program":
            self.driver = SimProgramDriver(self)
        else:
            self.driver = SimDriver(self)
        self.entities.append(self.driver)
        if self.options.crash_stage is not None:
            self.entities.append(SimInjector(self, self.options.crash_stage,
                                             self.options.crash_after or 1))

    # -- routing -----------------------------------------------------------

    def store_node_for(self, stage: str | None) -> str:
        exact = None
        generic = None
        for node_id, node in self.nodes.items():
            if node.store is None:
                continue
            if stage is not None and node.store.stage == stage and exact is None:
                exact = node_id
            if node.store.stage is None and generic is None:
                generic = node_id
        choice = generic if stage is None else (exact or generic)
        if choice is None:
            raise WorkloadError(f"no store available for stage {stage!r}")
        return choice

    def stage_store_nodes(self, stage: str) -> list[str]:
        exact = [node_id for node_id, node in self.nodes.items()
                 if node.store is not None and node.store.stage == stage]
        if exact:
            return exact
        return [self.store_node_for(stage)]

    def client_for(self, node_id: str) -> RemoteStore:
        client = self._clients.get(node_id)
        if client is None:
            endpoints = {agent.name: node_id
                         for agent in self.dispatcher.transports}
            client = RemoteStore(self.dispatcher, endpoints, issuer="sim")
            self._clients[node_id] = client
        return client

    # -- work units --------------------------------------------------------

    def intensional_work(self) -> IntensionalWork:
        if self._intensional_work is None:
            self._intensional_work = IntensionalWork(
                self.options.program, self.cluster.max_attempts,
                self.options.depth_limit)
        return self._intensional_work

    def stage_work(self, stage: str, store_node: str) -> StageWork:
        peers = []
        if stage == "classify" and self.options.replication:
            for node_id in self.stage_store_nodes("classify"):
                if node_id != store_node:
                    peers.append((node_id, self.client_for(node_id)))
        return StageWork(stage, self.cluster.max_attempts,
                         training_set=self.training,
                         replication=self.options.replication,
                         peers=peers, home_node=store_node)

    # -- failure and healing ----------------------------------------------

    def kill_node(self, node_id: str) -> None:
        node = self.nodes.pop(node_id, None)
        if node is None:
            return
        self.namespace.deregister(node_id)
        self.entities = [e for e in self.entities if e.owner != node_id]
        self.events.append({"event": "injected_crash", "node": node_id,
                            "clock_us": self.clock_us})

    def activate_node(self, config: NodeConfig, replacing: str,
                      restart: bool) -> Node:
        if restart:
            self.registry.forget(config.node_id)
        self._spawned.pop(config.node_id, None)
        node = self._install_node(config)
        if node.store is not None:
            self._recover_training(node)
        self.routing_generation += 1
        self.dispatcher.reset_availability()
        self.events.append({
            "event": "node_activated", "node": config.node_id,
            "replacing": replacing, "clock_us": self.clock_us,
        })
        return node

    def _recover_training(self, node: Node) -> None:
        if self.options.workload != "pipeline" or self.training is None:
            return
        if node.store.stage not in (None, "classify"):
            return
        wal_path = node.config.wal or self.options.wal_path
        if not wal_path or not os.path.exists(wal_path):
            return
        journal = self.training.journal
        recovered = recover(wal_path, self.options.job.method,
                            replica_lookup=lambda txn: journal.get(txn))
        self.training = recovered

    # -- main loop ---------------------------------------------------------

    def _quiescent(self) -> bool:
        """True when no live store holds pending or claimed work. The run
        ends only here, so replica copies drain even after the driver has
        every answer it needs."""
        return all(node.store.store.quiescent()
                   for node in self.nodes.values()
                   if node.store is not None)

    def run(self) -> RunReport:
        self._start()
        idle_streak = 0
        while not (self.driver.done and self._quiescent()):
            if self.steps >= MAX_STEPS:
                raise WorkloadError(
                    f"workload did not finish within {MAX_STEPS} steps")
            entity = self.rng.choice(self.entities)
            progressed = entity.step()
            self.clock_us += TICK_US
            self.steps += 1
            if progressed:
                idle_streak = 0
            else:
                idle_streak += 1
                if idle_streak > self.stall_limit:
                    raise WorkloadError(
                        "workload stalled: no entity is making progress")
        return self._build_report()

    def _build_report(self) -> RunReport:
        counters = aggregate_stats(
            node.store.store.stats() for node in self.nodes.values()
            if node.store is not None)
        counters["compute"] = self.counters.compute
        counters["replicated"] = self.counters.replicated
        counters["clock_us"] = self.clock_us
        counters["steps"] = self.steps
        if self.options.workload == "program":
            results = [self.driver.outcome]
        else:
            results = [self.driver.results[sample_id]
                       for sample_id in sorted(self.driver.results)]
        transports = [{
            "name": agent.name,
            "samples": agent.sample_count,
            "mean_us": agent.measured_latency,
            "available": agent.available,
        } for agent in self.dispatcher.transports]
        return RunReport(
            workload=self.options.workload,
            seed=self.options.seed,
            transport=self.options.transport,
            replication=self.options.replication,
            results=results,
            counters=counters,
            transports=transports,
            incidents=list(self.autonomic.incidents),
            events=list(self.events),
        )
