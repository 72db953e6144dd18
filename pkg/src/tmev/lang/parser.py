"""Recursive-descent parser for TokenLang.

See docs/grammar.ebnf for the grammar. ``parse`` returns a validated
:class:`SourceUnit`; syntax problems raise :class:`LangSyntaxError` and
semantic problems raise :class:`ValidationError`.
"""
from __future__ import annotations

from . import ast as A
from .errors import LangSyntaxError
from .lexer import tokenize
from .validate import validate_unit

_TYPE_ALIASES = {"int": "int", "int256": "int", "uint": "uint",
                 "uint256": "uint", "bool": "bool", "address": "address"}

# Binary operator precedence, loosest first.
_BINARY_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6,
}


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    # -- token plumbing ------------------------------------------------------

    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, k=1):
        j = min(self.i + k, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self):
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, *values):
        t = self.tok
        return t.kind in ("op", "kw") and t.value in values

    def error(self, message, tok=None):
        tok = tok or self.tok
        return LangSyntaxError(tok.line, tok.col, message)

    def expect(self, value):
        if not self.at(value):
            raise self.error(f"expected {value!r}, found {self.tok}")
        return self.advance()

    def expect_ident(self, what="identifier"):
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.tok}")
        return self.advance()

    def end_stmt(self):
        # The terminating ';' may be omitted directly before a closing brace.
        if self.at(";"):
            self.advance()
        elif not self.at("}"):
            raise self.error(f"expected ';', found {self.tok}")

    # -- declarations --------------------------------------------------------

    def unit(self, source_name):
        contracts = []
        while self.tok.kind != "eof":
            contracts.append(self.contract())
        if not contracts:
            raise self.error("expected 'contract'")
        return A.SourceUnit(tuple(contracts), source_name)

    def contract(self):
        start = self.expect("contract")
        name = self.expect_ident("contract name").value
        self.expect("{")
        state_vars, functions = [], []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated contract body")
            if self.at("int", "int256", "uint", "uint256", "bool", "mapping"):
                state_vars.append(self.state_var())
            else:
                functions.append(self.function())
        self.expect("}")
        return A.ContractIR(name, tuple(state_vars), tuple(functions),
                            pos=(start.line, start.col))

    def state_var(self):
        start = self.tok
        if self.at("mapping"):
            self.advance()
            self.expect("(")
            self.expect("address")
            self.expect("=>")
            if not self.at("uint", "uint256", "int", "int256"):
                raise self.error(f"expected mapping value type, found {self.tok}")
            self.advance()
            self.expect(")")
            kind = "mapping"
        else:
            kind = _TYPE_ALIASES[self.advance().value]
        name = self.expect_ident("state variable name").value
        if kind == "mapping" and self.at("["):
            # Tolerate the `balance[]` spelling seen in some sources.
            self.advance()
            self.expect("]")
        init = None
        if self.at("="):
            self.advance()
            init = self.literal()
        self.expect(";")
        return A.StateVar(name, kind, init, pos=(start.line, start.col))

    def literal(self):
        t = self.tok
        if self.at("true", "false"):
            self.advance()
            return t.value == "true"
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        if self.tok.kind != "int":
            raise self.error(f"expected literal, found {self.tok}")
        value = self.advance().value
        return -value if neg else value

    def value_type(self):
        if not self.at(*_TYPE_ALIASES):
            raise self.error(f"expected type, found {self.tok}")
        return _TYPE_ALIASES[self.advance().value]

    def function(self):
        start = self.tok
        owner_only = False
        if self.at("@"):
            self.advance()
            ann = self.expect_ident("annotation")
            if ann.value != "owner_only":
                raise self.error(f"unknown annotation {ann.value!r}", ann)
            owner_only = True
        if self.at("function"):
            self.advance()
        if self.tok.kind != "ident":
            raise self.error(f"expected state variable or function, found {self.tok}")
        name = self.advance().value
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                kind = self.value_type()
                pname = self.expect_ident("parameter name").value
                params.append(A.Param(pname, kind))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        returns = None
        if self.at("returns"):
            self.advance()
            self.expect("(")
            returns = self.value_type()
            self.expect(")")
        body = self.block()
        return A.FunctionIR(name, tuple(params), body, returns, owner_only,
                            pos=(start.line, start.col))

    # -- statements ----------------------------------------------------------

    def block(self):
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            body.append(self.statement())
        self.expect("}")
        return tuple(body)

    def branch_body(self):
        if self.at("{"):
            return self.block()
        return (self.statement(),)

    def statement(self):
        t = self.tok
        pos = (t.line, t.col)
        if self.at(*_TYPE_ALIASES):
            kind = self.value_type()
            name = self.expect_ident("local name").value
            self.expect("=")
            expr = self.expr()
            self.end_stmt()
            return A.LocalDecl(name, kind, expr, pos=pos)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.branch_body()
            orelse = ()
            if self.at("else"):
                self.advance()
                orelse = self.branch_body()
            return A.If(cond, then, orelse, pos=pos)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return A.While(cond, self.branch_body(), pos=pos)
        if self.at("return"):
            self.advance()
            expr = None
            if not self.at(";", "}"):
                expr = self.expr()
            self.end_stmt()
            return A.Return(expr, pos=pos)
        if t.kind == "ident":
            target = self.lvalue()
            if self.at("="):
                self.advance()
                expr = self.expr()
                self.end_stmt()
                return A.Assign(target, expr, pos=pos)
            if self.at(*A.COMPOUND_OPS):
                op = self.advance().value
                expr = self.expr()
                self.end_stmt()
                return A.CompoundAssign(target, op, expr, pos=pos)
            raise self.error(f"expected assignment operator, found {self.tok}")
        raise self.error(f"expected statement, found {self.tok}")

    def lvalue(self):
        t = self.expect_ident()
        if self.at("["):
            self.advance()
            key = self.expr()
            self.expect("]")
            return A.Index(t.value, key, pos=(t.line, t.col))
        return A.Name(t.value, pos=(t.line, t.col))

    # -- expressions ---------------------------------------------------------

    def expr(self, min_prec=1):
        lhs = self.unary()
        while True:
            t = self.tok
            prec = _BINARY_PREC.get(t.value) if t.kind == "op" else None
            if prec is None or prec < min_prec:
                return lhs
            self.advance()
            rhs = self.expr(prec + 1)
            lhs = A.Binary(t.value, lhs, rhs, pos=(t.line, t.col))

    def unary(self):
        t = self.tok
        if self.at("!", "-"):
            self.advance()
            return A.Unary(t.value, self.unary(), pos=(t.line, t.col))
        return self.primary()

    def primary(self):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int":
            self.advance()
            return A.Num(t.value, pos=pos)
        if self.at("true", "false"):
            self.advance()
            return A.Bool(t.value == "true", pos=pos)
        if self.at("msg"):
            self.advance()
            self.expect(".")
            field_tok = self.expect_ident("'sender'")
            if field_tok.value != "sender":
                raise self.error("only msg.sender is supported", field_tok)
            return A.Sender(pos=pos)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.advance()
            if self.at("["):
                self.advance()
                key = self.expr()
                self.expect("]")
                return A.Index(t.value, key, pos=pos)
            return A.Name(t.value, pos=pos)
        raise self.error(f"expected expression, found {t}")


def parse(source: str, source_name: str = "<string>") -> A.SourceUnit:
    """Parse and validate TokenLang source text."""
    unit = _Parser(tokenize(source)).unit(source_name)
    validate_unit(unit)
    return unit


def parse_contract(source: str, name=None) -> A.ContractIR:
    """Convenience: parse a unit and return one contract (the first by default)."""
    unit = parse(source)
    if name is None:
        return unit.contracts[0]
    c = unit.contract(name)
    if c is None:
        raise KeyError(name)
    return c


def parse_expr(text: str):
    """Parse a single free-standing expression (no name resolution)."""
    p = _Parser(tokenize(text))
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok} after expression")
    return e
