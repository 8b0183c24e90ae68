"""Distributed intensional evaluation over a demand store.

A worker holding an intensional demand evaluates the named definition with
the shared evaluator, but its warehouse is a view over the store: a lookup
miss issues a sub-demand and immediately claims it, the inline evaluation
computes it depth-first, and the matching store() completes the claim. Only
identifier evaluations cross the fabric; operators evaluate inline.

Sub-demand signatures are the same context keys the local warehouse uses, so
a demand's result is exactly the memoized value and re-issuing returns
already_computed. When the program's result is a bare identifier the root
demand IS that identifier's demand; any other result expression gets a
synthetic dictionary slot one past the real ids.
"""

from __future__ import annotations

import json

from ..engine import DEFAULT_DEPTH_LIMIT, EvalStats, eval_node
from ..errors import EvalError, TransportError
from ..fabric.demand import Demand, DemandKind
from ..lang.ast import NodeKind, Program
from ..lang.context import Context, context_key

ROOT_TARGET = "@result"


def intensional_payload(target: str, context: Context) -> bytes:
    body = {"target": target,
            "context": {name: tag for name, tag in context.items()}}
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_intensional(payload: bytes) -> tuple[str, Context]:
    body = json.loads(payload.decode("utf-8"))
    return body["target"], Context({name: int(tag)
                                    for name, tag in body["context"].items()})


def signature_for(program: Program, name: str, context: Context) -> str:
    item = program.item(name)
    if item is None:
        raise EvalError(f"could not resolve identifier {name!r}", "unresolved")
    return context_key(item.id, context, program.dimension_names)


def parse_signature(program: Program, signature: str) -> tuple[str, Context]:
    """Inverse of the context-key convention, for rebuilding a demand's
    payload from its signature alone."""
    parts = signature.split(",")
    id = int(parts[0])
    dims = sorted(program.dimension_names)
    tags = {name: int(tag) for name, tag in zip(dims, parts[1:])}
    if id >= len(program.dictionary):
        return ROOT_TARGET, Context(tags)
    return program.dictionary[id].name, Context(tags)


def root_demand(program: Program, context: Context, issuer: str) -> Demand:
    """The demand a generator issues for program.result at a context."""
    result = program.result
    if result.kind is NodeKind.ID:
        target = result.payload
        signature = signature_for(program, target, context)
    else:
        target = ROOT_TARGET
        signature = context_key(len(program.dictionary), context,
                                program.dimension_names)
    return Demand(signature=signature, kind=DemandKind.INTENSIONAL,
                  payload=intensional_payload(target, context), issuer=issuer)


class _StoreWarehouse:
    """Warehouse facade the evaluator drives; misses become sub-demands."""

    def __init__(self, evaluator: "DistributedEvaluator", root_signature: str):
        self._ev = evaluator
        self._cache: dict[str, int] = {}
        self._claimed: list[str] = [root_signature]
        self._nostore: set[str] = set()

    def lookup(self, key: str) -> int | None:
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if key in self._claimed:
            raise EvalError("self-referential demand cycle at one context",
                            "depth")
        value = self._ev._acquire(key, self)
        if value is not None:
            self._cache[key] = value
        return value

    def store(self, key: str, value: int) -> None:
        self._cache[key] = value
        if key in self._nostore:
            self._nostore.discard(key)
            return
        assert self._claimed and self._claimed[-1] == key, \
            "claim completions must nest"
        self._claimed.pop()
        self._ev._finish(key, value)

    def claim_for_inline(self, key: str) -> None:
        self._claimed.append(key)

    def mark_nostore(self, key: str) -> None:
        self._nostore.add(key)


class DistributedEvaluator:
    """Processes one intensional demand against a store client.

    poll_fn, when given, is called as poll_fn(attempt) between queries while
    another worker holds a needed sub-demand; returning False abandons the
    wait and the value is recomputed inline without storing. The simulation
    runs single-threaded steps where waiting can never succeed, so it passes
    no poll_fn and busy claims fall straight through to inline recompute.
    """

    def __init__(self, program: Program, client, worker_id: str,
                 depth_limit: int = DEFAULT_DEPTH_LIMIT, poll_fn=None):
        self.program = program
        self.client = client
        self.worker_id = worker_id
        self.depth_limit = depth_limit
        self.poll_fn = poll_fn
        self.stats = EvalStats()

    def process(self, demand: Demand) -> bytes:
        target, context = decode_intensional(demand.payload)
        if target == ROOT_TARGET:
            node = self.program.result
        else:
            item = self.program.item(target)
            if item is None:
                raise EvalError(f"could not resolve identifier {target!r}",
                                "unresolved")
            node = item.entry
        warehouse = _StoreWarehouse(self, demand.signature)
        self._warehouse = warehouse
        value = eval_node(node, context, self.program, warehouse, self.stats,
                          self.depth_limit)
        return encode_value(value)

    def outstanding_claims(self) -> list[str]:
        """Sub-demands still held in_process after a failed evaluation; the
        root demand itself (always first) is not included."""
        warehouse = getattr(self, "_warehouse", None)
        if warehouse is None:
            return []
        return list(warehouse._claimed[1:])

    # -- store traffic ------------------------------------------------------

    def _acquire(self, key: str, warehouse: _StoreWarehouse) -> int | None:
        stored = self.client.query(key)
        if stored is not None:
            return decode_value(key, stored)
        name, context = parse_signature(self.program, key)
        self.client.issue(Demand(signature=key, kind=DemandKind.INTENSIONAL,
                                 payload=intensional_payload(name, context),
                                 issuer=self.worker_id))
        outcome = self.client.claim(key, self.worker_id)
        if outcome.status == "claimed":
            warehouse.claim_for_inline(key)
            return None  # evaluator computes it inline; store() completes it
        if outcome.status == "computed":
            return decode_value(key, outcome.result)
        if outcome.status == "busy":
            return self._await_peer(key, warehouse)
        raise TransportError(f"demand {key} vanished after issue")

    def _await_peer(self, key: str, warehouse: _StoreWarehouse) -> int | None:
        attempt = 0
        while self.poll_fn is not None and self.poll_fn(attempt):
            attempt += 1
            stored = self.client.query(key)
            if stored is not None:
                return decode_value(key, stored)
        # peer never delivered: recompute inline, leave their claim alone
        warehouse.mark_nostore(key)
        return None

    def _finish(self, key: str, value: int) -> None:
        self.client.complete(key, encode_value(value), worker_id=self.worker_id)


# -- result encoding --------------------------------------------------------


def encode_value(value: int) -> bytes:
    return str(value).encode("ascii")


def encode_error_result(message: str, category: str) -> bytes:
    return json.dumps({"error": message, "category": category},
                      sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_value(signature: str, result: bytes) -> int:
    try:
        return int(result.decode("ascii"))
    except ValueError:
        body = json.loads(result.decode("utf-8"))
        raise EvalError(f"sub-demand {signature} failed: {body.get('error')}",
                        body.get("category", "eval")) from None


def decode_result(result: bytes):
    """("value", int) or ("error", {category, error}) for a result payload."""
    try:
        return "value", int(result.decode("ascii"))
    except ValueError:
        return "error", json.loads(result.decode("utf-8"))
