"""Cluster configuration: nodes, tiers, transports, and policy knobs.

The file format is JSON: {"nodes": [{"id": "n1", "tiers": ["GMT", "DST"],
"transports": [{"name": "tcp", "listen": "127.0.0.1:7401"}]}]}, with optional
top-level "heartbeat_ms", "max_attempts", and health-policy keys, and
optional per-node "worker_count", "stage", "standby", and "wal".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ConfigError
from ..pipeline.stages import STAGES


class Tier(str, Enum):
    MANAGER = "GMT"
    STORE = "DST"
    GENERATOR = "DGT"
    WORKER = "DWT"


REPLACEMENT_POLICIES = ("restart_same_node", "spawn_standby")


@dataclass
class TransportConfig:
    name: str
    listen: str = ""


@dataclass
class NodeConfig:
    node_id: str
    tiers: set[Tier]
    transports: list[TransportConfig] = field(default_factory=list)
    worker_count: int = 1
    stage: str | None = None
    standby: bool = False
    wal: str | None = None


@dataclass
class ClusterConfig:
    nodes: list[NodeConfig]
    heartbeat_ms: int = 500
    max_attempts: int = 3
    heartbeat_timeout_intervals: int = 3
    latency_degraded_us: float = 1000.0
    replacement: str | None = None  # None: standby when declared, else restart

    def node(self, node_id: str) -> NodeConfig:
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise ConfigError(f"unknown node {node_id!r}")

    def active_nodes(self) -> list[NodeConfig]:
        return [n for n in self.nodes if not n.standby]

    def standby_nodes(self) -> list[NodeConfig]:
        return [n for n in self.nodes if n.standby]


def _parse_node(body: dict) -> NodeConfig:
    if not isinstance(body, dict):
        raise ConfigError("node entry must be an object")
    node_id = body.get("id")
    if not node_id or not isinstance(node_id, str):
        raise ConfigError("node needs a nonempty id")
    raw_tiers = body.get("tiers")
    if not raw_tiers:
        raise ConfigError(f"node {node_id}: at least one tier required")
    tiers = set()
    for raw in raw_tiers:
        try:
            tiers.add(Tier(raw))
        except ValueError:
            raise ConfigError(f"node {node_id}: unknown tier {raw!r}") from None
    transports = []
    for entry in body.get("transports", [{"name": "inproc"}]):
        name = entry.get("name") if isinstance(entry, dict) else None
        if not name:
            raise ConfigError(f"node {node_id}: transport needs a name")
        transports.append(TransportConfig(name, entry.get("listen", "")))
    worker_count = body.get("worker_count", 1)
    if not isinstance(worker_count, int) or worker_count < 1:
        raise ConfigError(f"node {node_id}: worker_count must be >= 1")
    stage = body.get("stage")
    if stage is not None and stage not in STAGES:
        raise ConfigError(f"node {node_id}: unknown stage {stage!r}")
    standby = bool(body.get("standby", False))
    wal = body.get("wal")
    if wal is not None and not isinstance(wal, str):
        raise ConfigError(f"node {node_id}: wal must be a path string")
    return NodeConfig(node_id, tiers, transports, worker_count, stage,
                      standby, wal)


def parse_cluster_config(text: str) -> ClusterConfig:
    try:
        body = json.loads(text)
    except ValueError as err:
        raise ConfigError(f"cluster config is not valid JSON: {err}") from None
    if not isinstance(body, dict) or not isinstance(body.get("nodes"), list):
        raise ConfigError('cluster config needs a "nodes" list')
    nodes = [_parse_node(entry) for entry in body["nodes"]]
    if not nodes:
        raise ConfigError("cluster config needs at least one node")
    seen = set()
    for node in nodes:
        if node.node_id in seen:
            raise ConfigError(f"duplicate node id {node.node_id!r}")
        seen.add(node.node_id)
    managers = [n for n in nodes if Tier.MANAGER in n.tiers and not n.standby]
    if len(managers) != 1:
        raise ConfigError("exactly one active node must carry the GMT tier")
    for node in nodes:
        if node.standby and Tier.MANAGER in node.tiers:
            raise ConfigError(f"standby node {node.node_id} cannot carry GMT")

    config = ClusterConfig(nodes)
    heartbeat_ms = body.get("heartbeat_ms", config.heartbeat_ms)
    if not isinstance(heartbeat_ms, int) or heartbeat_ms < 1:
        raise ConfigError("heartbeat_ms must be a positive integer")
    config.heartbeat_ms = heartbeat_ms
    max_attempts = body.get("max_attempts", config.max_attempts)
    if not isinstance(max_attempts, int) or max_attempts < 1:
        raise ConfigError("max_attempts must be a positive integer")
    config.max_attempts = max_attempts
    intervals = body.get("heartbeat_timeout_intervals",
                         config.heartbeat_timeout_intervals)
    if not isinstance(intervals, int) or intervals < 1:
        raise ConfigError("heartbeat_timeout_intervals must be >= 1")
    config.heartbeat_timeout_intervals = intervals
    degraded = body.get("latency_degraded_us", config.latency_degraded_us)
    if not isinstance(degraded, (int, float)) or degraded <= 0:
        raise ConfigError("latency_degraded_us must be positive")
    config.latency_degraded_us = float(degraded)
    replacement = body.get("replacement")
    if replacement is not None and replacement not in REPLACEMENT_POLICIES:
        raise ConfigError(f"unknown replacement policy {replacement!r}")
    config.replacement = replacement
    return config


def load_cluster_config(path: str) -> ClusterConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_cluster_config(f.read())
    except OSError as err:
        raise ConfigError(f"cannot read cluster config: {err}") from None


def default_cluster() -> ClusterConfig:
    node = NodeConfig("n1",
                      {Tier.MANAGER, Tier.STORE, Tier.GENERATOR, Tier.WORKER},
                      [TransportConfig("inproc")])
    return ClusterConfig([node])
