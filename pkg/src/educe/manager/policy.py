"""Health policy knobs for the autonomic manager."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import PolicyError


@dataclass
class HealthPolicy:
    heartbeat_timeout_intervals: int = 3
    latency_degraded_us: float = 1000.0
    replacement: str | None = None  # restart_same_node | spawn_standby | auto

    def __post_init__(self) -> None:
        if self.heartbeat_timeout_intervals < 1:
            raise PolicyError("heartbeat_timeout_intervals must be >= 1")
        if self.latency_degraded_us <= 0:
            raise PolicyError("latency_degraded_us must be positive")
