from .ast import AstNode, BINARY_KINDS, Dimension, DictionaryItem, NodeKind, Program, SourceLocation
from .context import Context, context_key, parse_context_spec
from .parser import parse_program
from .printer import pretty_print, print_expr

__all__ = [
    "AstNode", "BINARY_KINDS", "Context", "Dimension", "DictionaryItem",
    "NodeKind", "Program", "SourceLocation", "context_key",
    "parse_context_spec", "parse_program", "pretty_print", "print_expr",
]
