"""Frame-level store frontend.

Translates wire frames into store operations and store outcomes back into
acks or response frames. The TCP server and the in-process namespace both
hand their frames here, so remote stores behave identically over either
transport.
"""

from __future__ import annotations

import base64
import json

from ..errors import ProtocolError, StoreShutdownError
from .codec import Frame
from .demand import Demand, DemandKind
from .store import DemandStore


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


class StoreFrontend:
    def __init__(self, store: DemandStore):
        self.store = store

    def handle(self, frame: Frame):
        """Returns ("ack", None) or ("frame", Frame)."""
        try:
            return self._dispatch(frame)
        except ProtocolError as err:
            return "frame", Frame(op="error", kind="protocol", signature=str(err))
        except StoreShutdownError as err:
            return "frame", Frame(op="error", kind="shutdown", signature=str(err))

    def _dispatch(self, frame: Frame):
        op = frame.op
        if op == "demand":
            self.store.issue(Demand(
                signature=frame.signature,
                kind=DemandKind(frame.kind) if frame.kind else DemandKind.INTENSIONAL,
                payload=frame.payload,
                issuer=frame.worker or "remote",
                attempt=frame.attempt,
            ))
            return "ack", None
        if op == "result":
            self.store.complete(frame.signature, frame.payload,
                                worker_id=frame.worker or None,
                                failed=frame.failed, replicated=frame.replicated)
            return "ack", None
        if op == "take":
            demand = self.store.take_pending(frame.worker)
            if demand is None:
                return "frame", Frame(op="none")
            return "frame", _demand_frame(demand)
        if op == "claim":
            outcome = self.store.claim(frame.signature, frame.worker)
            if outcome.status == "claimed":
                return "frame", _demand_frame(outcome.demand)
            if outcome.status == "computed":
                return "frame", Frame(op="result", signature=frame.signature,
                                      payload=outcome.result)
            return "frame", Frame(op="none", signature=frame.signature,
                                  kind=outcome.status)
        if op == "query":
            result = self.store.query(frame.signature)
            if result is None:
                return "frame", Frame(op="none", signature=frame.signature)
            return "frame", Frame(op="result", signature=frame.signature,
                                  payload=result)
        if op == "requeue":
            count = self.store.requeue_lost(frame.worker)
            return "frame", Frame(op="ok", signature=str(count))
        if op == "retry":
            attempt = self.store.requeue_one(frame.signature, frame.worker)
            return "frame", Frame(op="ok", signature=str(attempt))
        if op == "scan":
            listing = [{
                "signature": d.signature,
                "kind": d.kind.value,
                "payload": base64.b64encode(d.payload).decode("ascii"),
                "result": base64.b64encode(d.result or b"").decode("ascii"),
                "failed": d.failed,
                "replicated": d.replicated,
            } for d in self.store.computed_items()]
            return "frame", Frame(op="ok", payload=_json_bytes(listing))
        if op == "state":
            record = self.store.get(frame.signature)
            state = record.state.value if record is not None else "absent"
            return "frame", Frame(op="ok", signature=frame.signature, kind=state)
        if op == "stats":
            return "frame", Frame(op="ok", payload=_json_bytes(self.store.stats()))
        raise ProtocolError(f"unknown op {op!r}")


def _demand_frame(demand: Demand) -> Frame:
    return Frame(op="demand", signature=demand.signature, kind=demand.kind.value,
                 attempt=demand.attempt, payload=demand.payload,
                 worker=demand.issuer)
