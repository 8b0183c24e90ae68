"""Autonomic health monitoring and self-healing."""

from .autonomic import (
    DEGRADED,
    DOWN,
    HEALTHY,
    REPLACED,
    AutonomicManager,
    HealingActions,
    StageHealth,
)
from .policy import HealthPolicy

__all__ = [
    "AutonomicManager",
    "DEGRADED",
    "DOWN",
    "HEALTHY",
    "HealingActions",
    "HealthPolicy",
    "REPLACED",
    "StageHealth",
]
