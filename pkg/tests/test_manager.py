"""Autonomic manager: health classification transitions and healing paths."""

import pytest

from educe.errors import PolicyError
from educe.manager import (
    DEGRADED,
    DOWN,
    HEALTHY,
    REPLACED,
    AutonomicManager,
    HealingActions,
    HealthPolicy,
    StageHealth,
)
from educe.runtime.config import NodeConfig, Tier
from educe.runtime.registry import Registry

HEARTBEAT_US = 500_000


class RecordingActions(HealingActions):
    """Scripted healing hooks that log every call."""

    def __init__(self, replace_ok=True, scale_ok=True, requeued=4):
        self.calls = []
        self.replace_ok = replace_ok
        self.scale_ok = scale_ok
        self.requeued = requeued

    def requeue_lost_node(self, node_id):
        self.calls.append(("requeue", node_id))
        return self.requeued

    def replace_node(self, node_id):
        self.calls.append(("replace", node_id))
        return "spawn_standby", self.replace_ok

    def reselect_protocol(self):
        self.calls.append(("reselect", None))

    def scale_workers(self, node_id):
        self.calls.append(("scale", node_id))
        return self.scale_ok


def _cluster(*configs):
    clock = [0]
    registry = Registry(lambda: clock[0])
    for config in configs:
        registry.register_node(config)
        registry.mark_running(config.node_id)
    return clock, registry


def _manager(registry, actions=None, **policy_kw):
    actions = actions if actions is not None else RecordingActions()
    policy = HealthPolicy(**policy_kw)
    return AutonomicManager(registry, policy, HEARTBEAT_US, actions), actions


def _worker_node(node_id="w1", stage="classify"):
    return NodeConfig(node_id, {Tier.STORE, Tier.WORKER}, stage=stage)


# ---------------------------------------------------------------------------
# policy validation


def test_policy_rejects_nonpositive_knobs():
    with pytest.raises(PolicyError):
        HealthPolicy(heartbeat_timeout_intervals=0)
    with pytest.raises(PolicyError):
        HealthPolicy(latency_degraded_us=0.0)
    with pytest.raises(PolicyError):
        HealthPolicy(latency_degraded_us=-5.0)


def test_policy_defaults():
    policy = HealthPolicy()
    assert policy.heartbeat_timeout_intervals == 3
    assert policy.latency_degraded_us == 1000.0
    assert policy.replacement is None


# ---------------------------------------------------------------------------
# observe: state classification


def test_fresh_nodes_produce_no_transitions():
    _, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    assert manager.observe(active_latency_us=120.0) == []


def test_stale_heartbeat_marks_down_once():
    clock, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    clock[0] = 3 * HEARTBEAT_US + 1  # one past the deadline
    transitions = manager.observe(None)
    assert len(transitions) == 1
    health = transitions[0]
    assert health.state == DOWN
    assert health.node_id == "w1"
    assert health.stage == "classify"
    assert "stale" in health.evidence
    # already down: later passes stay quiet even though the clock runs on
    clock[0] *= 2
    assert manager.observe(None) == []


def test_heartbeat_within_deadline_keeps_node_healthy():
    clock, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    clock[0] = 2 * HEARTBEAT_US
    registry.heartbeat("w1")
    clock[0] = 4 * HEARTBEAT_US
    assert manager.observe(None) == []


def test_registry_down_status_marks_down():
    _, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    registry.mark_down("w1")
    transitions = manager.observe(None)
    assert [t.state for t in transitions] == [DOWN]


def test_stageless_node_reports_wildcard_stage():
    config = NodeConfig("hub", {Tier.MANAGER, Tier.STORE})
    _, registry = _cluster(config)
    manager, _ = _manager(registry)
    registry.mark_down("hub")
    (health,) = manager.observe(None)
    assert health.stage == "*"


def test_high_latency_degrades_worker_tier_only():
    _, registry = _cluster(
        _worker_node("w1"),
        NodeConfig("s1", {Tier.STORE}, stage="extract"),
    )
    manager, _ = _manager(registry, latency_degraded_us=1000.0)
    transitions = manager.observe(active_latency_us=5000.0)
    assert [(t.node_id, t.state) for t in transitions] == [("w1", DEGRADED)]
    # staying slow does not re-report the same degradation
    assert manager.observe(active_latency_us=5000.0) == []


def test_unmeasured_latency_never_degrades():
    _, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    assert manager.observe(active_latency_us=None) == []


def test_latency_recovery_transitions_back_to_healthy():
    _, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    manager.observe(active_latency_us=9000.0)
    transitions = manager.observe(active_latency_us=80.0)
    assert [(t.node_id, t.state) for t in transitions] == [("w1", HEALTHY)]
    assert manager.observe(active_latency_us=80.0) == []


def test_down_wins_over_degraded():
    clock, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    clock[0] = 10 * HEARTBEAT_US
    transitions = manager.observe(active_latency_us=9000.0)
    assert [t.state for t in transitions] == [DOWN]


# ---------------------------------------------------------------------------
# heal: down path


def test_heal_rejects_healthy_report():
    _, registry = _cluster(_worker_node())
    manager, _ = _manager(registry)
    with pytest.raises(PolicyError):
        manager.heal(StageHealth("classify", "w1", HEALTHY))


def test_heal_down_requeues_then_replaces():
    clock, registry = _cluster(_worker_node())
    manager, actions = _manager(registry)
    clock[0] = 4 * HEARTBEAT_US
    (health,) = manager.observe(None)
    report = manager.heal(health)
    assert actions.calls == [("requeue", "w1"), ("replace", "w1")]
    assert report["ok"] is True
    assert report["action"] == "spawn_standby"
    assert report["requeued"] == 4
    assert manager.incidents == [report]


def test_node_is_replaced_at_most_once_per_incident():
    clock, registry = _cluster(_worker_node())
    manager, actions = _manager(registry)
    clock[0] = 4 * HEARTBEAT_US
    (health,) = manager.observe(None)
    manager.heal(health)
    again = manager.heal(health)
    assert again["action"] == "already_replaced"
    assert actions.calls.count(("replace", "w1")) == 1
    assert len(manager.incidents) == 1  # no-op heal is not an incident


def test_failed_replacement_stays_healable():
    clock, registry = _cluster(_worker_node())
    actions = RecordingActions(replace_ok=False)
    manager, _ = _manager(registry, actions=actions)
    clock[0] = 4 * HEARTBEAT_US
    (health,) = manager.observe(None)
    report = manager.heal(health)
    assert report["ok"] is False
    assert report["action"] == "healing_failed"
    # the node never reached REPLACED, so a retry runs the full path again
    actions.replace_ok = True
    retry = manager.heal(health)
    assert retry["ok"] is True
    assert actions.calls.count(("replace", "w1")) == 2
    assert len(manager.incidents) == 2


# ---------------------------------------------------------------------------
# heal: degraded path


def test_degraded_reselects_every_time_scales_once():
    _, registry = _cluster(_worker_node())
    manager, actions = _manager(registry)
    (health,) = manager.observe(active_latency_us=9000.0)
    first = manager.heal(health)
    second = manager.heal(health)
    reselects = [c for c in actions.calls if c[0] == "reselect"]
    scales = [c for c in actions.calls if c[0] == "scale"]
    assert len(reselects) == 2
    assert len(scales) == 1
    assert first["scaled"] is True
    assert second["scaled"] is False


def test_recovery_rearms_degraded_remediation():
    _, registry = _cluster(_worker_node())
    manager, actions = _manager(registry)
    (health,) = manager.observe(active_latency_us=9000.0)
    manager.heal(health)
    manager.observe(active_latency_us=50.0)  # recovers, re-arms
    (health,) = manager.observe(active_latency_us=9000.0)
    report = manager.heal(health)
    assert report["scaled"] is True
    assert [c for c in actions.calls if c[0] == "scale"] == \
        [("scale", "w1"), ("scale", "w1")]


def test_scale_refusal_is_reported_not_raised():
    _, registry = _cluster(_worker_node())
    actions = RecordingActions(scale_ok=False)
    manager, _ = _manager(registry, actions=actions)
    (health,) = manager.observe(active_latency_us=9000.0)
    report = manager.heal(health)
    assert report["ok"] is True
    assert report["scaled"] is False


def test_incident_ledger_accumulates_in_order():
    clock, registry = _cluster(_worker_node("w1"), _worker_node("w2"))
    manager, _ = _manager(registry)
    (degraded,) = [t for t in manager.observe(active_latency_us=9000.0)
                   if t.node_id == "w1"]
    manager.heal(degraded)
    registry.mark_down("w2")
    downs = [t for t in manager.observe(active_latency_us=9000.0)
             if t.state == DOWN]
    for health in downs:
        manager.heal(health)
    actions_seen = [i["action"] for i in manager.incidents]
    assert actions_seen[0] == "remediate_degraded"
    assert "spawn_standby" in actions_seen[1:]
