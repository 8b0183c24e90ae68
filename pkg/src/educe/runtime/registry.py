"""Manager-side registry of nodes, tier allocations, and heartbeats.

Time comes from an injected now_fn in microseconds so the simulation can run
it on a virtual clock and the threaded engine on the real one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import ConfigError
from .config import NodeConfig, Tier


class NodeStatus(str, Enum):
    STARTING = "starting"
    RUNNING = "running"
    DOWN = "down"


@dataclass
class RegistryEntry:
    config: NodeConfig
    status: NodeStatus
    last_heartbeat: int


class Registry:
    def __init__(self, now_fn):
        self._now = now_fn
        self.nodes: dict[str, RegistryEntry] = {}
        self.allocations: dict[str, set[Tier]] = {}

    def register_node(self, config: NodeConfig) -> str:
        if config.node_id in self.nodes:
            raise ConfigError(f"node {config.node_id!r} is already registered")
        self.nodes[config.node_id] = RegistryEntry(config, NodeStatus.STARTING,
                                                   self._now())
        self.allocations[config.node_id] = set()
        return config.node_id

    def allocate_tier(self, node_id: str, tier: Tier) -> None:
        if node_id not in self.nodes:
            raise ConfigError(f"cannot allocate on unknown node {node_id!r}")
        allocated = self.allocations[node_id]
        if tier in allocated:
            raise ConfigError(f"tier {tier.value} already allocated on {node_id}")
        allocated.add(tier)

    def mark_running(self, node_id: str) -> None:
        self._entry(node_id).status = NodeStatus.RUNNING

    def mark_down(self, node_id: str) -> None:
        self._entry(node_id).status = NodeStatus.DOWN

    def forget(self, node_id: str) -> None:
        """Drop a dead node's entry so a replacement can register its id."""
        self.nodes.pop(node_id, None)
        self.allocations.pop(node_id, None)

    def heartbeat(self, node_id: str) -> None:
        entry = self._entry(node_id)
        if entry.status is NodeStatus.DOWN:
            return  # a down node's timestamp stays frozen
        entry.last_heartbeat = max(entry.last_heartbeat, self._now())

    def heartbeat_age(self, node_id: str) -> int:
        return self._now() - self._entry(node_id).last_heartbeat

    def status(self, node_id: str) -> NodeStatus:
        return self._entry(node_id).status

    def live_nodes(self) -> list[str]:
        return [node_id for node_id, entry in self.nodes.items()
                if entry.status is not NodeStatus.DOWN]

    def _entry(self, node_id: str) -> RegistryEntry:
        if node_id not in self.nodes:
            raise ConfigError(f"unknown node {node_id!r}")
        return self.nodes[node_id]
