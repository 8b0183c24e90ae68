"""Reference evaluator with no warehouse: the oracle the engine is checked
against.

Deliberately self-contained. It shares the syntax-tree and context types with
the engine but re-states the semantics (arithmetic included) in the plainest
possible recursive form, so a bug in the engine cannot hide in shared helper
code. Exponential on recursive programs; that is the point.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EvalError
from ..lang.ast import AstNode, NodeKind, Program
from ..lang.context import Context

DEFAULT_DEPTH_LIMIT = 100_000

_U64 = 1 << 64
_S63 = 1 << 63


@dataclass
class NaiveStats:
    # counts every identifier expansion: there is no cache to hit
    id_evaluations: int = 0
    max_depth: int = 0


def naive_eval(node: AstNode, context: Context, program: Program,
               stats: NaiveStats | None = None,
               depth_limit: int = DEFAULT_DEPTH_LIMIT) -> int:
    if stats is None:
        stats = NaiveStats()

    def wrap(v: int) -> int:
        v %= _U64
        return v - _U64 if v >= _S63 else v

    def ev(n: AstNode, ctx: Context, depth: int) -> int:
        if depth > depth_limit:
            raise EvalError(f"recursion depth limit {depth_limit} exceeded",
                            "depth",
                            n.loc.line if n.loc else None,
                            n.loc.col if n.loc else None)
        if depth > stats.max_depth:
            stats.max_depth = depth
        kind = n.kind
        if kind is NodeKind.CONST:
            return wrap(n.payload)
        if kind is NodeKind.HASH:
            return ctx.tag(n.payload)
        if kind is NodeKind.ID:
            item = program.item(n.payload)
            if item is None:
                raise EvalError(f"could not resolve identifier {n.payload!r}",
                                "unresolved",
                                n.loc.line if n.loc else None,
                                n.loc.col if n.loc else None)
            stats.id_evaluations += 1
            return ev(item.entry, ctx, depth + 1)
        if kind is NodeKind.AT:
            tag = ev(n.children[1], ctx, depth + 1)
            return ev(n.children[0], ctx.with_tag(n.payload, tag), depth + 1)
        if kind is NodeKind.IF:
            cond = ev(n.children[0], ctx, depth + 1)
            branch = n.children[1] if cond != 0 else n.children[2]
            return ev(branch, ctx, depth + 1)
        left = ev(n.children[0], ctx, depth + 1)
        right = ev(n.children[1], ctx, depth + 1)
        if kind is NodeKind.ADD:
            return wrap(left + right)
        if kind is NodeKind.MIN:
            return wrap(left - right)
        if kind is NodeKind.TIMES:
            return wrap(left * right)
        if kind in (NodeKind.DIV, NodeKind.MOD):
            if right == 0:
                word = "division" if kind is NodeKind.DIV else "modulo"
                raise EvalError(f"{word} by zero", "div_zero",
                                n.loc.line if n.loc else None,
                                n.loc.col if n.loc else None)
            q = abs(left) // abs(right)
            if (left < 0) != (right < 0):
                q = -q
            if kind is NodeKind.DIV:
                return wrap(q)
            return wrap(left - q * right)
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

    try:
        return ev(node, context, 1)
    except RecursionError:
        raise EvalError("host recursion capacity exhausted before the "
                        "configured depth limit", "depth") from None
