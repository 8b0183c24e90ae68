"""Demand-driven evaluator with warehouse memoization.

The walk is iterative over explicit work and value stacks, so the configured
depth limit is a real limit instead of a proxy for the host stack, and a
100,000-deep recursion is actually reachable. Identifier evaluations consult
the warehouse by context key; a miss evaluates the definition once and stores
the value.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EvalError
from ..lang.ast import AstNode, NodeKind, Program
from ..lang.context import Context, context_key
from .warehouse import Warehouse

DEFAULT_DEPTH_LIMIT = 100_000

_U64 = 1 << 64
_S63 = 1 << 63


def wrap64(v: int) -> int:
    """Reduce into the 64-bit signed range with two's-complement wrapping."""
    v %= _U64
    return v - _U64 if v >= _S63 else v


@dataclass
class EvalStats:
    id_evaluations: int = 0  # identifier evaluations that missed the warehouse
    max_depth: int = 0
    # warehouse counters are copied here by execute() for reporting
    warehouse_hits: int = 0
    warehouse_misses: int = 0
    warehouse_stores: int = 0


def _loc(n: AstNode) -> tuple[int | None, int | None]:
    return (n.loc.line, n.loc.col) if n.loc else (None, None)


def _apply(n: AstNode, left: int, right: int) -> int:
    kind = n.kind
    if kind is NodeKind.ADD:
        return wrap64(left + right)
    if kind is NodeKind.MIN:
        return wrap64(left - right)
    if kind is NodeKind.TIMES:
        return wrap64(left * right)
    if kind is NodeKind.DIV or kind is NodeKind.MOD:
        if right == 0:
            word = "division" if kind is NodeKind.DIV else "modulo"
            line, col = _loc(n)
            raise EvalError(f"{word} by zero", "div_zero", line, col)
        # truncate toward zero; remainder takes the dividend's sign
        q = abs(left) // abs(right)
        if (left < 0) != (right < 0):
            q = -q
        return wrap64(q) if kind is NodeKind.DIV else wrap64(left - q * right)
    if kind is NodeKind.LT:
        return 1 if left < right else 0
    if kind is NodeKind.GT:
        return 1 if left > right else 0
    if kind is NodeKind.LE:
        return 1 if left <= right else 0
    if kind is NodeKind.GE:
        return 1 if left >= right else 0
    if kind is NodeKind.EQ:
        return 1 if left == right else 0
    if kind is NodeKind.NE:
        return 1 if left != right else 0
    if kind is NodeKind.AND:
        return 1 if left != 0 and right != 0 else 0
    return 1 if left != 0 or right != 0 else 0  # OR


def eval_node(node: AstNode, context: Context, program: Program,
              warehouse: Warehouse, stats: EvalStats | None = None,
              depth_limit: int = DEFAULT_DEPTH_LIMIT) -> int:
    """Evaluate one expression against a program and warehouse.

    AT rebinds its dimension to the tag expression's value and evaluates the
    body; HASH reads the current tag; binary operators see the original
    context on both sides (contexts are immutable, so nothing the left side
    does can leak into the right); IF evaluates the condition and then exactly
    one branch, any nonzero condition meaning true; ID answers from the
    warehouse or evaluates its definition once and stores it.
    """
    if stats is None:
        stats = EvalStats()
    dims = program.dimension_names
    values: list[int] = []
    # work entries: ("eval", node, ctx, depth) evaluates a node;
    # the others are continuations applied to values already computed
    work: list[tuple] = [("eval", node, context, 1)]
    while work:
        entry = work.pop()
        op = entry[0]
        if op == "eval":
            _, n, ctx, depth = entry
            if depth > depth_limit:
                line, col = _loc(n)
                raise EvalError(f"recursion depth limit {depth_limit} exceeded",
                                "depth", line, col)
            if depth > stats.max_depth:
                stats.max_depth = depth
            kind = n.kind
            if kind is NodeKind.CONST:
                values.append(wrap64(n.payload))
            elif kind is NodeKind.HASH:
                values.append(ctx.tag(n.payload))
            elif kind is NodeKind.ID:
                item = program.item(n.payload)
                if item is None:
                    line, col = _loc(n)
                    raise EvalError(f"could not resolve identifier {n.payload!r}",
                                    "unresolved", line, col)
                key = context_key(item.id, ctx, dims)
                cached = warehouse.lookup(key)
                if cached is not None:
                    values.append(cached)
                else:
                    work.append(("store", key))
                    work.append(("eval", item.entry, ctx, depth + 1))
            elif kind is NodeKind.IF:
                work.append(("branch", n, ctx, depth))
                work.append(("eval", n.children[0], ctx, depth + 1))
            elif kind is NodeKind.AT:
                work.append(("rebind", n, ctx, depth))
                work.append(("eval", n.children[1], ctx, depth + 1))
            else:
                # binary operator: left fully evaluates before right starts
                work.append(("apply", n))
                work.append(("eval", n.children[1], ctx, depth + 1))
                work.append(("eval", n.children[0], ctx, depth + 1))
        elif op == "apply":
            right = values.pop()
            left = values.pop()
            values.append(_apply(entry[1], left, right))
        elif op == "branch":
            _, n, ctx, depth = entry
            branch = n.children[1] if values.pop() != 0 else n.children[2]
            work.append(("eval", branch, ctx, depth + 1))
        elif op == "rebind":
            _, n, ctx, depth = entry
            tag = values.pop()
            work.append(("eval", n.children[0], ctx.with_tag(n.payload, tag), depth + 1))
        else:  # store
            warehouse.store(entry[1], values[-1])
            stats.id_evaluations += 1
    return values[-1]


def execute(program: Program, context: Context,
            depth_limit: int = DEFAULT_DEPTH_LIMIT) -> tuple[int, EvalStats]:
    """Evaluate program.result at the given context against a fresh warehouse."""
    warehouse = Warehouse()
    stats = EvalStats()
    value = eval_node(program.result, context, program, warehouse, stats, depth_limit)
    stats.warehouse_hits = warehouse.hits
    stats.warehouse_misses = warehouse.misses
    stats.warehouse_stores = warehouse.stores
    return value, stats
