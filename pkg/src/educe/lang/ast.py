"""Syntax tree, dictionary, and program types for the intensional language."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class NodeKind(str, Enum):
    AT = "AT"
    HASH = "HASH"
    ADD = "ADD"
    MIN = "MIN"
    TIMES = "TIMES"
    DIV = "DIV"
    MOD = "MOD"
    LT = "LT"
    GT = "GT"
    LE = "LE"
    GE = "GE"
    EQ = "EQ"
    NE = "NE"
    AND = "AND"
    OR = "OR"
    IF = "IF"
    ID = "ID"
    CONST = "CONST"


BINARY_KINDS = frozenset({
    NodeKind.ADD, NodeKind.MIN, NodeKind.TIMES, NodeKind.DIV, NodeKind.MOD,
    NodeKind.LT, NodeKind.GT, NodeKind.LE, NodeKind.GE, NodeKind.EQ,
    NodeKind.NE, NodeKind.AND, NodeKind.OR,
})


@dataclass(frozen=True)
class SourceLocation:
    line: int
    col: int


@dataclass(frozen=True)
class AstNode:
    """One expression node.

    children is positional: AT holds (body, tag-expr) with the dimension name
    in payload; HASH holds no children and the dimension name in payload;
    binary operators hold (left, right); IF holds (condition, then, else).
    ID carries the identifier name and CONST the integer literal in payload.
    """

    kind: NodeKind
    children: tuple[AstNode, ...] = ()
    payload: str | int | None = None
    # source position is carried for error messages but ignored by equality,
    # so reparsing printed output compares structurally equal
    loc: SourceLocation | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        n = len(self.children)
        kind = self.kind
        if kind in BINARY_KINDS:
            ok = n == 2
        elif kind is NodeKind.IF:
            ok = n == 3
        elif kind is NodeKind.AT:
            ok = n == 2 and isinstance(self.payload, str)
        elif kind is NodeKind.HASH:
            ok = n == 0 and isinstance(self.payload, str)
        elif kind is NodeKind.ID:
            ok = n == 0 and isinstance(self.payload, str)
        elif kind is NodeKind.CONST:
            ok = n == 0 and isinstance(self.payload, int)
        else:  # pragma: no cover - enum is closed
            ok = False
        if not ok:
            raise ValueError(f"malformed {kind.value} node")


@dataclass(frozen=True)
class Dimension:
    name: str


@dataclass(frozen=True)
class DictionaryItem:
    id: int
    name: str
    entry: AstNode


@dataclass
class Program:
    """A parsed program: declared dimensions, the definition dictionary, and
    the result expression. Dictionary ids are dense 0..n-1 in declaration
    order."""

    dimensions: tuple[Dimension, ...]
    dictionary: tuple[DictionaryItem, ...]
    result: AstNode

    def __post_init__(self) -> None:
        self._by_name = {item.name: item for item in self.dictionary}
        self.dimension_names = tuple(d.name for d in self.dimensions)

    def item(self, name: str) -> DictionaryItem | None:
        return self._by_name.get(name)
