"""Evaluation contexts: sparse maps from dimension name to integer tag.

A dimension absent from the map reads as tag 0. Contexts are immutable;
rebinding returns a new context, which is what makes "the original context is
restored between operands" hold by construction in the evaluator.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator

from ..errors import ContextSpecError
from .ast import Program

_PAIR_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(-?\d+)\s*$")


class Context:
    __slots__ = ("_tags",)

    def __init__(self, bindings: dict[str, int] | Iterable[tuple[str, int]] | None = None):
        self._tags: dict[str, int] = dict(bindings or {})

    def tag(self, name: str) -> int:
        return self._tags.get(name, 0)

    def with_tag(self, name: str, tag: int) -> "Context":
        new = dict(self._tags)
        new[name] = tag
        return Context(new)

    def items(self) -> Iterator[tuple[str, int]]:
        return iter(sorted(self._tags.items()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Context):
            return NotImplemented
        return self._tags == other._tags

    def __repr__(self) -> str:
        inner = ",".join(f"{k}:{v}" for k, v in self.items())
        return f"Context({{{inner}}})"


def parse_context_spec(spec: str, program: Program) -> Context:
    """Parse "d=2,m=3" style bindings against a program's declared dimensions.

    Unlisted declared dimensions are bound to 0. Names that are not declared
    dimensions are errors.
    """
    declared = set(program.dimension_names)
    tags = {name: 0 for name in declared}
    if spec.strip():
        for part in spec.split(","):
            m = _PAIR_RE.match(part)
            if m is None:
                raise ContextSpecError(f"malformed context pair {part.strip()!r}")
            name, tag = m.group(1), int(m.group(2))
            if name not in declared:
                raise ContextSpecError(f"cannot resolve dimension {name!r}")
            tags[name] = tag
    return Context(tags)


def context_key(id: int, context: Context, dims: Iterable[str]) -> str:
    """Warehouse key: decimal id, then ","+tag for each declared dimension in
    canonical (lexicographic) order. Injective over (id, declared bindings)."""
    parts = [str(id)]
    for name in sorted(dims):
        parts.append(str(context.tag(name)))
    return ",".join(parts)
