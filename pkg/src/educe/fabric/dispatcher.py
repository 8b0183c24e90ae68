"""Per-send transport selection with failover.

Every send picks the available agent with the lowest effective latency, ties
going to registration order. A delivery failure marks the agent unavailable
and retries once on the next choice; a second failure surfaces as
DeliveryError. Demand and result deliveries feed the latency estimate, the
bookkeeping verbs do not, so selection behaves the same under synthetic and
wall clocks.
"""

from __future__ import annotations

from ..errors import DeliveryError, FabricDownError, TransportError
from .codec import Frame
from .demand import Demand
from .transport import TransportAgent

DEFAULT_TIMEOUT_S = 5.0


class Dispatcher:
    def __init__(self, transports: list[TransportAgent],
                 timeout_s: float = DEFAULT_TIMEOUT_S, on_event=None):
        if not transports:
            raise FabricDownError("dispatcher needs at least one transport")
        self.transports = list(transports)
        self.timeout_s = timeout_s
        self.active: TransportAgent | None = None
        self.events: list[dict] = []
        self._on_event = on_event

    def _emit(self, event: dict) -> None:
        self.events.append(event)
        if self._on_event is not None:
            self._on_event(event)

    def select_protocol(self, endpoints: dict[str, str] | None = None) -> TransportAgent:
        candidates = [t for t in self.transports
                      if t.available and (endpoints is None or t.name in endpoints)]
        if not candidates:
            raise FabricDownError("no available transport")
        best = min(candidates, key=lambda t: t.effective_latency())
        if best is not self.active:
            self._emit({
                "event": "protocol_switch",
                "from": self.active.name if self.active is not None else None,
                "to": best.name,
                "effective_latency_us": best.effective_latency(),
            })
            self.active = best
        return best

    def reset_availability(self) -> None:
        for agent in self.transports:
            agent.available = True

    def request(self, endpoints: dict[str, str], frame: Frame,
                expect_ack: bool = False, record_latency: bool = False) -> Frame | None:
        last_err: TransportError | None = None
        for _ in range(2):  # one retry after a failover
            try:
                agent = self.select_protocol(endpoints)
            except FabricDownError:
                if last_err is None:
                    raise
                break
            try:
                return agent.request(endpoints[agent.name], frame, self.timeout_s,
                                     expect_ack, record_latency)
            except TransportError as err:
                agent.available = False
                self._emit({"event": "transport_down", "transport": agent.name,
                            "error": str(err)})
                last_err = err
        raise DeliveryError(f"delivery failed after retry: {last_err}")

    # -- verbs ------------------------------------------------------------

    def send_demand(self, endpoints: dict[str, str], demand: Demand) -> None:
        frame = Frame(op="demand", signature=demand.signature,
                      kind=demand.kind.value, attempt=demand.attempt,
                      payload=demand.payload, worker=demand.issuer)
        self.request(endpoints, frame, expect_ack=True, record_latency=True)

    def send_result(self, endpoints: dict[str, str], signature: str, result: bytes,
                    worker: str = "", failed: bool = False,
                    replicated: bool = False) -> None:
        frame = Frame(op="result", signature=signature, payload=result,
                      worker=worker, failed=failed, replicated=replicated)
        self.request(endpoints, frame, expect_ack=True, record_latency=True)

    def close(self) -> None:
        for agent in self.transports:
            agent.close()
