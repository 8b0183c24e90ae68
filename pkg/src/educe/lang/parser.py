"""Lexer and recursive-descent parser for the program grammar.

    program := { decl ";" } "result" expr
    decl    := "dimension" IDENT | IDENT "=" expr
    expr    := "if" expr "then" expr "else" expr | or
    or      := and { "||" and }
    and     := cmp { "&&" cmp }
    cmp     := add [ ("<"|">"|"<="|">="|"=="|"!=") add ]
    add     := mul { ("+"|"-") mul }
    mul     := at { ("*"|"/"|"%") at }
    at      := atom { "@" IDENT atom }
    atom    := INT | IDENT | "#" IDENT | "(" expr ")"

"//" comments run to end of line; whitespace is insignificant. Identifier
references are resolved after the whole program has been read, so definitions
may refer forward. An identifier atom naming a declared dimension is sugar
for "#name", which keeps ID nodes pointing at dictionary items only.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError
from .ast import AstNode, Dimension, DictionaryItem, NodeKind, Program, SourceLocation

_KEYWORDS = frozenset({"dimension", "result", "if", "then", "else"})

# longest match first for the two-character operators
_TWO_CHAR = ("||", "&&", "<=", ">=", "==", "!=")
_ONE_CHAR = ";=@#()+-*/%<>"

_CMP_KINDS = {
    "<": NodeKind.LT, ">": NodeKind.GT, "<=": NodeKind.LE,
    ">=": NodeKind.GE, "==": NodeKind.EQ, "!=": NodeKind.NE,
}
_ADD_KINDS = {"+": NodeKind.ADD, "-": NodeKind.MIN}
_MUL_KINDS = {"*": NodeKind.TIMES, "/": NodeKind.DIV, "%": NodeKind.MOD}


@dataclass(frozen=True)
class Token:
    kind: str  # "INT", "IDENT", "EOF", a keyword, or the operator text itself
    text: str
    line: int
    col: int


def _lex(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("INT", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = text if text in _KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, line, start_col))
            col += j - i
            i = j
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token(two, two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token(ch, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> Token:
        return self._tokens[self._pos]

    def advance(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.kind != "EOF":
            self._pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text or "end of input"
            raise ParseError(f"unexpected {shown!r}", tok.line, tok.col,
                             expected=(what or kind,))
        return self.advance()

    def expr(self) -> AstNode:
        tok = self.peek()
        if tok.kind == "if":
            loc = SourceLocation(tok.line, tok.col)
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            els = self.expr()
            return AstNode(NodeKind.IF, (cond, then, els), loc=loc)
        return self._or()

    def _or(self) -> AstNode:
        node = self._and()
        while self.peek().kind == "||":
            tok = self.advance()
            node = AstNode(NodeKind.OR, (node, self._and()),
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _and(self) -> AstNode:
        node = self._cmp()
        while self.peek().kind == "&&":
            tok = self.advance()
            node = AstNode(NodeKind.AND, (node, self._cmp()),
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _cmp(self) -> AstNode:
        node = self._add()
        tok = self.peek()
        if tok.kind in _CMP_KINDS:
            # comparisons do not chain: a < b < c is a syntax error downstream
            self.advance()
            node = AstNode(_CMP_KINDS[tok.kind], (node, self._add()),
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _add(self) -> AstNode:
        node = self._mul()
        while self.peek().kind in _ADD_KINDS:
            tok = self.advance()
            node = AstNode(_ADD_KINDS[tok.kind], (node, self._mul()),
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _mul(self) -> AstNode:
        node = self._at()
        while self.peek().kind in _MUL_KINDS:
            tok = self.advance()
            node = AstNode(_MUL_KINDS[tok.kind], (node, self._at()),
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _at(self) -> AstNode:
        node = self._atom()
        while self.peek().kind == "@":
            tok = self.advance()
            dim = self.expect("IDENT", "dimension name")
            tag = self._atom()
            node = AstNode(NodeKind.AT, (node, tag), payload=dim.text,
                           loc=SourceLocation(tok.line, tok.col))
        return node

    def _atom(self) -> AstNode:
        tok = self.peek()
        loc = SourceLocation(tok.line, tok.col)
        if tok.kind == "INT":
            self.advance()
            return AstNode(NodeKind.CONST, payload=int(tok.text), loc=loc)
        if tok.kind == "IDENT":
            self.advance()
            return AstNode(NodeKind.ID, payload=tok.text, loc=loc)
        if tok.kind == "#":
            self.advance()
            dim = self.expect("IDENT", "dimension name")
            return AstNode(NodeKind.HASH, payload=dim.text, loc=loc)
        if tok.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        shown = tok.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", tok.line, tok.col,
                         expected=("INT", "IDENT", "'#'", "'('"))


def _resolve(node: AstNode, defs: set[str], dims: set[str]) -> AstNode:
    """Rewrite ID nodes naming dimensions into tag queries and reject unknown
    names. Returns the original node when nothing underneath changed."""
    if node.kind is NodeKind.ID:
        name = node.payload
        if name in defs:
            return node
        if name in dims:
            return AstNode(NodeKind.HASH, payload=name, loc=node.loc)
        loc = node.loc or SourceLocation(0, 0)
        raise ParseError(f"could not resolve identifier {name!r}", loc.line, loc.col)
    if node.kind in (NodeKind.HASH, NodeKind.AT) and node.payload not in dims:
        loc = node.loc or SourceLocation(0, 0)
        raise ParseError(f"could not resolve dimension {node.payload!r}", loc.line, loc.col)
    if not node.children:
        return node
    new_children = tuple(_resolve(c, defs, dims) for c in node.children)
    if all(a is b for a, b in zip(new_children, node.children)):
        return node
    return AstNode(node.kind, new_children, payload=node.payload, loc=node.loc)


def parse_program(source: str) -> Program:
    parser = _Parser(_lex(source))
    dims: list[Dimension] = []
    defs: list[tuple[str, AstNode]] = []
    dim_names: set[str] = set()
    def_names: set[str] = set()
    while True:
        tok = parser.peek()
        if tok.kind == "result":
            break
        if tok.kind == "dimension":
            parser.advance()
            name_tok = parser.expect("IDENT", "dimension name")
            if name_tok.text in dim_names:
                raise ParseError(f"duplicate dimension {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            if name_tok.text in def_names:
                raise ParseError(
                    f"{name_tok.text!r} is already a definition",
                    name_tok.line, name_tok.col)
            dims.append(Dimension(name_tok.text))
            dim_names.add(name_tok.text)
            parser.expect(";")
            continue
        if tok.kind == "IDENT":
            name_tok = parser.advance()
            if name_tok.text in def_names:
                raise ParseError(f"duplicate definition {name_tok.text!r}",
                                 name_tok.line, name_tok.col)
            if name_tok.text in dim_names:
                raise ParseError(
                    f"{name_tok.text!r} is already a dimension",
                    name_tok.line, name_tok.col)
            parser.expect("=")
            entry = parser.expr()
            parser.expect(";")
            defs.append((name_tok.text, entry))
            def_names.add(name_tok.text)
            continue
        shown = tok.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", tok.line, tok.col,
                         expected=("'dimension'", "definition", "'result'"))
    parser.expect("result")
    result = parser.expr()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise ParseError(f"unexpected {tok.text!r} after result expression",
                         tok.line, tok.col)
    dictionary = tuple(
        DictionaryItem(i, name, _resolve(entry, def_names, dim_names))
        for i, (name, entry) in enumerate(defs))
    return Program(tuple(dims), dictionary, _resolve(result, def_names, dim_names))
