"""Store client used by workers and generators on other nodes.

Speaks the frame verbs through a dispatcher. Mirrors the local store surface
closely enough that runtime code can hold either one.
"""

from __future__ import annotations

import base64
import json

from ..errors import ProtocolError, TransportError
from .codec import Frame
from .demand import ClaimOutcome, Demand, DemandKind, DemandState
from .dispatcher import Dispatcher


def _demand_from_frame(frame: Frame, state: DemandState) -> Demand:
    return Demand(signature=frame.signature, kind=DemandKind(frame.kind),
                  payload=frame.payload, issuer=frame.worker,
                  attempt=frame.attempt, state=state)


class RemoteStore:
    def __init__(self, dispatcher: Dispatcher, endpoints: dict[str, str],
                 issuer: str = ""):
        self.dispatcher = dispatcher
        self.endpoints = dict(endpoints)
        self.issuer = issuer

    def issue(self, demand: Demand) -> None:
        self.dispatcher.send_demand(self.endpoints, demand)

    def take_pending(self, worker_id: str) -> Demand | None:
        response = self.dispatcher.request(
            self.endpoints, Frame(op="take", worker=worker_id))
        if response.op == "none":
            return None
        return _demand_from_frame(response, DemandState.IN_PROCESS)

    def claim(self, signature: str, worker_id: str) -> ClaimOutcome:
        response = self.dispatcher.request(
            self.endpoints, Frame(op="claim", signature=signature,
                                  worker=worker_id))
        if response.op == "demand":
            return ClaimOutcome(
                "claimed", demand=_demand_from_frame(response,
                                                     DemandState.IN_PROCESS))
        if response.op == "result":
            return ClaimOutcome("computed", result=response.payload)
        if response.op == "none" and response.kind in ("busy", "absent"):
            return ClaimOutcome(response.kind)
        raise TransportError(f"unexpected claim response {response.op!r}")

    def query(self, signature: str) -> bytes | None:
        response = self.dispatcher.request(
            self.endpoints, Frame(op="query", signature=signature))
        if response.op == "none":
            return None
        return response.payload

    def complete(self, signature: str, result: bytes,
                 worker_id: str | None = None, failed: bool = False,
                 replicated: bool = False) -> None:
        try:
            self.dispatcher.send_result(self.endpoints, signature, result,
                                        worker=worker_id or "", failed=failed,
                                        replicated=replicated)
        except ProtocolError:
            # A retried delivery can land twice; if the stored result is the
            # one we sent, the first copy arrived and this is benign.
            stored = self.query(signature)
            if stored != result:
                raise

    def requeue_lost(self, worker_id: str) -> int:
        response = self.dispatcher.request(
            self.endpoints, Frame(op="requeue", worker=worker_id))
        return int(response.signature)

    def requeue_one(self, signature: str, worker_id: str) -> int:
        response = self.dispatcher.request(
            self.endpoints, Frame(op="retry", signature=signature,
                                  worker=worker_id))
        return int(response.signature)

    def computed_items(self) -> list[Demand]:
        response = self.dispatcher.request(self.endpoints, Frame(op="scan"))
        items = []
        for entry in json.loads(response.payload.decode("utf-8")):
            items.append(Demand(
                signature=entry["signature"],
                kind=DemandKind(entry["kind"]),
                payload=base64.b64decode(entry["payload"]),
                issuer="",
                state=DemandState.COMPUTED,
                result=base64.b64decode(entry["result"]),
                failed=entry["failed"],
                replicated=entry["replicated"],
            ))
        return items

    def demand_state(self, signature: str) -> str:
        """pending / in_process / computed / absent."""
        response = self.dispatcher.request(
            self.endpoints, Frame(op="state", signature=signature))
        return response.kind

    def stats(self) -> dict:
        response = self.dispatcher.request(self.endpoints, Frame(op="stats"))
        return json.loads(response.payload.decode("utf-8"))
