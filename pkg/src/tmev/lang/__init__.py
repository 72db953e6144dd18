"""TokenLang front end: lexer, parser, validator and pretty-printer."""
from .ast import (Assign, Binary, Bool, CompoundAssign, ContractIR, FunctionIR,
                  If, Index, LocalDecl, Name, Num, Param, Return, Sender,
                  SourceUnit, StateVar, Unary, While)
from .errors import LangError, LangSyntaxError, ValidationError
from .parser import parse, parse_contract, parse_expr
from .printer import format_expr, format_stmt, pretty_print

__all__ = [
    "Assign", "Binary", "Bool", "CompoundAssign", "ContractIR", "FunctionIR",
    "If", "Index", "LocalDecl", "Name", "Num", "Param", "Return", "Sender",
    "SourceUnit", "StateVar", "Unary", "While",
    "LangError", "LangSyntaxError", "ValidationError",
    "parse", "parse_contract", "parse_expr", "format_expr", "format_stmt", "pretty_print",
]
