"""Demand objects: uniquely keyed units of work flowing between tiers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class DemandKind(str, Enum):
    INTENSIONAL = "intensional"
    PROCEDURAL = "procedural"
    RESOURCE = "resource"
    SYSTEM = "system"


class DemandState(str, Enum):
    PENDING = "pending"
    IN_PROCESS = "in_process"
    COMPUTED = "computed"


@dataclass
class Demand:
    """State transitions are owned by the store: pending -> in_process ->
    computed, plus in_process -> pending when a worker is lost. The result is
    present exactly when the demand is computed."""

    signature: str
    kind: DemandKind
    payload: bytes
    issuer: str
    attempt: int = 1
    state: DemandState = DemandState.PENDING
    result: bytes | None = None
    worker: str | None = None
    # failed marks a demand completed with an error payload after its
    # attempts ran out; replicated marks a result adopted from a peer store
    failed: bool = False
    replicated: bool = False


@dataclass(frozen=True)
class IssueOutcome:
    status: str  # enqueued | deduplicated | already_computed
    result: bytes | None = None


@dataclass(frozen=True)
class ClaimOutcome:
    status: str  # claimed | computed | busy | absent
    demand: Demand | None = None
    result: bytes | None = None
