"""The demand store: FIFO pending queue plus the table of every demand seen.

The store doubles as the shared value warehouse for distributed evaluation:
issue() answers already_computed from the table, and query() serves warehouse
lookups, so "already computed data" detection is one signature comparison.
All operations are atomic under one lock; no demand is ever handed to two
workers and no signature completes twice.
"""

from __future__ import annotations

import threading
from collections import deque

from ..errors import ProtocolError, StoreShutdownError
from .demand import ClaimOutcome, Demand, DemandKind, DemandState, IssueOutcome


class DemandStore:
    def __init__(self, store_id: str = "dst"):
        self.store_id = store_id
        self._lock = threading.Lock()
        self._pending: deque[str] = deque()
        self._table: dict[str, Demand] = {}
        self._shutdown = False
        self.watermark = 0  # monotone count of completed demands
        self.completions: dict[str, int] = {}  # per-signature completion count
        # issued = enqueued + deduplicated; already_computed outcomes are a
        # subset of deduplicated so the identity stays exact
        self.issued = 0
        self.enqueued = 0
        self.deduplicated = 0
        self.already_computed = 0
        self.requeued = 0
        self.failed_count = 0
        self.warehouse_hits = 0
        self.warehouse_misses = 0

    def _check_open(self) -> None:
        if self._shutdown:
            raise StoreShutdownError(f"store {self.store_id} is shut down")

    def issue(self, demand: Demand) -> IssueOutcome:
        with self._lock:
            self._check_open()
            self.issued += 1
            existing = self._table.get(demand.signature)
            if existing is None:
                demand.state = DemandState.PENDING
                self._table[demand.signature] = demand
                self._pending.append(demand.signature)
                self.enqueued += 1
                return IssueOutcome("enqueued")
            if existing.state is DemandState.COMPUTED:
                self.deduplicated += 1
                self.already_computed += 1
                return IssueOutcome("already_computed", existing.result)
            self.deduplicated += 1
            return IssueOutcome("deduplicated")

    def take_pending(self, worker_id: str) -> Demand | None:
        with self._lock:
            self._check_open()
            if not self._pending:
                return None
            signature = self._pending.popleft()
            demand = self._table[signature]
            demand.state = DemandState.IN_PROCESS
            demand.worker = worker_id
            return demand

    def claim(self, signature: str, worker_id: str) -> ClaimOutcome:
        """Atomically take one specific pending demand; used by evaluators
        that issue a sub-demand and want to compute it depth-first."""
        with self._lock:
            self._check_open()
            demand = self._table.get(signature)
            if demand is None:
                return ClaimOutcome("absent")
            if demand.state is DemandState.COMPUTED:
                return ClaimOutcome("computed", result=demand.result)
            if demand.state is DemandState.IN_PROCESS:
                return ClaimOutcome("busy")
            self._pending.remove(signature)
            demand.state = DemandState.IN_PROCESS
            demand.worker = worker_id
            return ClaimOutcome("claimed", demand=demand)

    def complete(self, signature: str, result: bytes, worker_id: str | None = None,
                 failed: bool = False, replicated: bool = False) -> None:
        with self._lock:
            self._check_open()
            demand = self._table.get(signature)
            if demand is None or demand.state is not DemandState.IN_PROCESS:
                raise ProtocolError(
                    f"complete on {signature!r}: demand is not in process")
            if worker_id is not None and demand.worker != worker_id:
                raise ProtocolError(
                    f"complete on {signature!r}: held by {demand.worker!r}, "
                    f"not {worker_id!r}")
            demand.state = DemandState.COMPUTED
            demand.result = result
            demand.worker = None
            demand.failed = failed
            demand.replicated = replicated
            if failed:
                demand.kind = DemandKind.SYSTEM
                self.failed_count += 1
            self.watermark += 1
            self.completions[signature] = self.completions.get(signature, 0) + 1

    def requeue_lost(self, worker_id: str) -> int:
        """Return every demand held by worker_id to the queue front with its
        attempt bumped. Earliest-issued lands frontmost."""
        with self._lock:
            self._check_open()
            lost = [d for d in self._table.values()
                    if d.state is DemandState.IN_PROCESS and d.worker == worker_id]
            for demand in reversed(lost):
                demand.state = DemandState.PENDING
                demand.worker = None
                demand.attempt += 1
                self._pending.appendleft(demand.signature)
                self.requeued += 1
            return len(lost)

    def requeue_one(self, signature: str, worker_id: str) -> int:
        """Work-function failure path: put one held demand back for retry."""
        with self._lock:
            self._check_open()
            demand = self._table.get(signature)
            if demand is None or demand.state is not DemandState.IN_PROCESS \
                    or demand.worker != worker_id:
                raise ProtocolError(
                    f"requeue on {signature!r}: not held by {worker_id!r}")
            demand.state = DemandState.PENDING
            demand.worker = None
            demand.attempt += 1
            self._pending.appendleft(signature)
            self.requeued += 1
            return demand.attempt

    def query(self, signature: str) -> bytes | None:
        """Warehouse lookup: a computed result or nothing. Counts hit/miss."""
        with self._lock:
            self._check_open()
            demand = self._table.get(signature)
            if demand is not None and demand.state is DemandState.COMPUTED:
                self.warehouse_hits += 1
                return demand.result
            self.warehouse_misses += 1
            return None

    def get(self, signature: str) -> Demand | None:
        """Bookkeeping accessor; no counter effects."""
        with self._lock:
            return self._table.get(signature)

    def computed_items(self) -> list[Demand]:
        with self._lock:
            return [d for d in self._table.values()
                    if d.state is DemandState.COMPUTED]

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def in_process_count(self) -> int:
        with self._lock:
            return sum(1 for d in self._table.values()
                       if d.state is DemandState.IN_PROCESS)

    def quiescent(self) -> bool:
        with self._lock:
            return not self._pending and not any(
                d.state is DemandState.IN_PROCESS for d in self._table.values())

    def coherent(self) -> bool:
        """Queue/table coherence: the pending queue holds exactly the
        signatures whose table state is pending."""
        with self._lock:
            queued = set(self._pending)
            marked = {s for s, d in self._table.items()
                      if d.state is DemandState.PENDING}
            return queued == marked and len(queued) == len(self._pending)

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {
                "issued": self.issued,
                "enqueued": self.enqueued,
                "deduplicated": self.deduplicated,
                "already_computed": self.already_computed,
                "computed": self.watermark,
                "requeued": self.requeued,
                "failed": self.failed_count,
                "warehouse_hits": self.warehouse_hits,
                "warehouse_misses": self.warehouse_misses,
            }

    def shutdown(self) -> None:
        with self._lock:
            self._shutdown = True
