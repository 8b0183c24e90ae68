"""Per-node runtime state: one controller per tier the node carries.

A Node is a passive facade; the engines own scheduling. Controllers keep the
state that must survive a scheduler step: the store itself, worker identities,
and the generator's forwarded set (keyed by routing generation so a healed
cluster re-forwards everything it already forwarded once).
"""

from __future__ import annotations

from ..fabric.frontend import StoreFrontend
from ..fabric.store import DemandStore
from .config import NodeConfig, Tier


class StoreController:
    def __init__(self, node_id: str, stage: str | None):
        self.node_id = node_id
        self.stage = stage
        self.store = DemandStore(store_id=node_id)
        self.frontend = StoreFrontend(self.store)


class WorkerController:
    def __init__(self, node_id: str, count: int):
        self.node_id = node_id
        self.initial_count = count
        self.count = count

    def worker_ids(self) -> list[str]:
        return [f"{self.node_id}/w{i}" for i in range(self.count)]

    def scale_to(self, count: int) -> bool:
        # scale-up is capped at twice the configured size
        cap = self.initial_count * 2
        target = min(count, cap)
        if target <= self.count:
            return False
        self.count = target
        return True


class GeneratorController:
    """Forwards upstream results downstream as fresh demands, exactly once
    per (routing generation, signature)."""

    def __init__(self, node_id: str):
        self.node_id = node_id
        self.forwarded: set[tuple[int, str]] = set()

    def should_forward(self, generation: int, signature: str) -> bool:
        key = (generation, signature)
        if key in self.forwarded:
            return False
        self.forwarded.add(key)
        return True


class ManagerController:
    def __init__(self, node_id: str):
        self.node_id = node_id


class Node:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.node_id = config.node_id
        self.controllers: dict[Tier, object] = {}
        for tier in config.tiers:
            if tier is Tier.STORE:
                self.controllers[tier] = StoreController(config.node_id, config.stage)
            elif tier is Tier.WORKER:
                self.controllers[tier] = WorkerController(config.node_id, config.worker_count)
            elif tier is Tier.GENERATOR:
                self.controllers[tier] = GeneratorController(config.node_id)
            elif tier is Tier.MANAGER:
                self.controllers[tier] = ManagerController(config.node_id)

    def has_tier(self, tier: Tier) -> bool:
        return tier in self.controllers

    @property
    def store(self) -> StoreController | None:
        ctrl = self.controllers.get(Tier.STORE)
        return ctrl  # type: ignore[return-value]

    @property
    def workers(self) -> WorkerController | None:
        ctrl = self.controllers.get(Tier.WORKER)
        return ctrl  # type: ignore[return-value]

    @property
    def generator(self) -> GeneratorController | None:
        ctrl = self.controllers.get(Tier.GENERATOR)
        return ctrl  # type: ignore[return-value]
