"""Pretty-printer emitting source that reparses to a structurally equal tree."""

from __future__ import annotations

from .ast import AstNode, NodeKind, Program

# grammar levels; a child whose level is below the slot's requirement gets parens
_IF, _OR, _AND, _CMP, _ADD, _MUL, _AT, _ATOM = range(8)

_OP_TEXT = {
    NodeKind.ADD: "+", NodeKind.MIN: "-", NodeKind.TIMES: "*",
    NodeKind.DIV: "/", NodeKind.MOD: "%",
    NodeKind.LT: "<", NodeKind.GT: ">", NodeKind.LE: "<=",
    NodeKind.GE: ">=", NodeKind.EQ: "==", NodeKind.NE: "!=",
    NodeKind.AND: "&&", NodeKind.OR: "||",
}

# (node level, left slot requirement, right slot requirement); left-assoc
# chains keep their own level on the left, comparisons do not chain at all
_BINARY_LEVELS = {
    NodeKind.OR: (_OR, _OR, _AND),
    NodeKind.AND: (_AND, _AND, _CMP),
    NodeKind.LT: (_CMP, _ADD, _ADD), NodeKind.GT: (_CMP, _ADD, _ADD),
    NodeKind.LE: (_CMP, _ADD, _ADD), NodeKind.GE: (_CMP, _ADD, _ADD),
    NodeKind.EQ: (_CMP, _ADD, _ADD), NodeKind.NE: (_CMP, _ADD, _ADD),
    NodeKind.ADD: (_ADD, _ADD, _MUL), NodeKind.MIN: (_ADD, _ADD, _MUL),
    NodeKind.TIMES: (_MUL, _MUL, _AT), NodeKind.DIV: (_MUL, _MUL, _AT),
    NodeKind.MOD: (_MUL, _MUL, _AT),
}


def _render(node: AstNode, min_level: int) -> str:
    kind = node.kind
    if kind is NodeKind.CONST:
        k = node.payload
        # the grammar has no negative literals; value-preserving spelling
        return str(k) if k >= 0 else f"(0 - {-k})"
    if kind is NodeKind.ID:
        return node.payload
    if kind is NodeKind.HASH:
        return "#" + node.payload
    if kind is NodeKind.IF:
        text = (f"if {_render(node.children[0], _IF)}"
                f" then {_render(node.children[1], _IF)}"
                f" else {_render(node.children[2], _IF)}")
        level = _IF
    elif kind is NodeKind.AT:
        text = (f"{_render(node.children[0], _AT)}"
                f" @ {node.payload} {_render(node.children[1], _ATOM)}")
        level = _AT
    else:
        level, left_req, right_req = _BINARY_LEVELS[kind]
        text = (f"{_render(node.children[0], left_req)}"
                f" {_OP_TEXT[kind]} {_render(node.children[1], right_req)}")
    return f"({text})" if level < min_level else text


def print_expr(node: AstNode) -> str:
    return _render(node, _IF)


def pretty_print(program: Program) -> str:
    lines = [f"dimension {d.name};" for d in program.dimensions]
    lines.extend(f"{item.name} = {print_expr(item.entry)};" for item in program.dictionary)
    lines.append(f"result {print_expr(program.result)}")
    return "\n".join(lines) + "\n"
