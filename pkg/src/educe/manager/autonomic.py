"""Autonomic health manager: observe node health, drive self-healing.

The manager reads heartbeat ages from the registry and the active delivery
latency, classifies each node healthy/degraded/down, and heals through an
injected actions object so the same logic runs against the simulation or a
real cluster. A node is replaced at most once per incident; degraded nodes
are remediated once and re-arm only after the latency recovers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import PolicyError
from ..runtime.config import Tier
from ..runtime.registry import NodeStatus, Registry
from .policy import HealthPolicy

HEALTHY = "healthy"
DEGRADED = "degraded"
DOWN = "down"
REPLACED = "replaced"


@dataclass
class StageHealth:
    stage: str
    node_id: str
    state: str
    evidence: str = ""


class HealingActions:
    """Engine hooks the manager heals through."""

    def requeue_lost_node(self, node_id: str) -> int:
        raise NotImplementedError

    def replace_node(self, node_id: str) -> tuple[str, bool]:
        """Returns (action description, succeeded)."""
        raise NotImplementedError

    def reselect_protocol(self) -> None:
        raise NotImplementedError

    def scale_workers(self, node_id: str) -> bool:
        """Add one worker if under the cap; returns whether it scaled."""
        raise NotImplementedError


@dataclass
class _NodeTrack:
    state: str = HEALTHY
    remediated: bool = False


class AutonomicManager:
    def __init__(self, registry: Registry, policy: HealthPolicy,
                 heartbeat_us: int, actions: HealingActions):
        self.registry = registry
        self.policy = policy
        self.heartbeat_us = heartbeat_us
        self.actions = actions
        self._tracks: dict[str, _NodeTrack] = {}
        self.incidents: list[dict] = []

    def _track(self, node_id: str) -> _NodeTrack:
        return self._tracks.setdefault(node_id, _NodeTrack())

    def _stage_of(self, node_id: str) -> str:
        stage = self.registry.nodes[node_id].config.stage
        return stage if stage is not None else "*"

    def observe(self, active_latency_us: float | None) -> list[StageHealth]:
        """One monitoring pass; returns the transitions since the last one."""
        transitions: list[StageHealth] = []
        deadline = self.policy.heartbeat_timeout_intervals * self.heartbeat_us
        slow = (active_latency_us is not None
                and active_latency_us > self.policy.latency_degraded_us)
        for node_id, entry in self.registry.nodes.items():
            track = self._track(node_id)
            if track.state in (DOWN, REPLACED):
                continue
            if entry.status is NodeStatus.DOWN or \
                    self.registry.heartbeat_age(node_id) > deadline:
                track.state = DOWN
                transitions.append(StageHealth(
                    self._stage_of(node_id), node_id, DOWN,
                    f"heartbeat stale {self.registry.heartbeat_age(node_id)}us"))
                continue
            if slow and Tier.WORKER in entry.config.tiers:
                if track.state == HEALTHY:
                    track.state = DEGRADED
                    track.remediated = False
                    transitions.append(StageHealth(
                        self._stage_of(node_id), node_id, DEGRADED,
                        f"active latency {active_latency_us:.0f}us"))
            elif track.state == DEGRADED:
                track.state = HEALTHY
                track.remediated = False
                transitions.append(StageHealth(
                    self._stage_of(node_id), node_id, HEALTHY, "latency recovered"))
        return transitions

    def heal(self, health: StageHealth) -> dict:
        if health.state not in (DEGRADED, DOWN):
            raise PolicyError(f"cannot heal a node in state {health.state!r}")
        track = self._track(health.node_id)
        if health.state == DOWN:
            if track.state == REPLACED:
                return {"node": health.node_id, "action": "already_replaced",
                        "ok": True}
            requeued = self.actions.requeue_lost_node(health.node_id)
            action, ok = self.actions.replace_node(health.node_id)
            if ok:
                track.state = REPLACED
            report = {"node": health.node_id, "stage": health.stage,
                      "action": action, "ok": ok, "requeued": requeued}
            if not ok:
                report["action"] = "healing_failed"
            self.incidents.append(report)
            return report
        # degraded: re-run protocol selection, scale workers once
        self.actions.reselect_protocol()
        scaled = False
        if not track.remediated:
            scaled = self.actions.scale_workers(health.node_id)
            track.remediated = True
        report = {"node": health.node_id, "stage": health.stage,
                  "action": "remediate_degraded", "ok": True, "scaled": scaled}
        self.incidents.append(report)
        return report
