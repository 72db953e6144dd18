"""Name resolution and light type checking for parsed TokenLang units."""
from __future__ import annotations

from . import ast as A
from .errors import ValidationError

_ARITH = {"+", "-", "*", "/"}
_ORDER = {"<", "<=", ">", ">="}
_EQUALITY = {"==", "!="}
_LOGIC = {"&&", "||"}


def _err(msg, node=None):
    line, col = getattr(node, "pos", (0, 0)) if node is not None else (0, 0)
    return ValidationError(msg, line, col)


def _numeric(kind):
    return kind in A.NUMERIC_KINDS


class _FunctionChecker:
    def __init__(self, contract, fn):
        self.contract = contract
        self.fn = fn
        self.state = {v.name: v.kind for v in contract.state_vars}
        self.scope = {}
        for p in fn.params:
            if p.name in self.scope:
                raise _err(f"duplicate parameter {p.name!r} in {fn.name}", fn)
            if p.name in self.state:
                raise _err(f"parameter {p.name!r} shadows a state variable", fn)
            self.scope[p.name] = p.kind

    def lookup(self, name, node):
        if name in self.scope:
            return self.scope[name]
        if name in self.state:
            return self.state[name]
        raise _err(f"undeclared name {name!r} in {self.fn.name}", node)

    def expr_kind(self, e):
        if isinstance(e, A.Num):
            return "int"
        if isinstance(e, A.Bool):
            return "bool"
        if isinstance(e, A.Sender):
            return "address"
        if isinstance(e, A.Name):
            kind = self.lookup(e.id, e)
            if kind == "mapping":
                raise _err(f"mapping {e.id!r} must be indexed", e)
            return kind
        if isinstance(e, A.Index):
            if self.state.get(e.base) != "mapping":
                raise _err(f"{e.base!r} is not a mapping", e)
            if self.expr_kind(e.key) != "address":
                raise _err(f"mapping key for {e.base!r} must be an address", e)
            return "uint"
        if isinstance(e, A.Unary):
            k = self.expr_kind(e.operand)
            if not _numeric(k):
                raise _err(f"operator {e.op!r} applied to {k}", e)
            return "bool" if e.op == "!" else "int"
        if isinstance(e, A.Binary):
            lk = self.expr_kind(e.left)
            rk = self.expr_kind(e.right)
            if e.op in _EQUALITY:
                if (lk == "address") != (rk == "address"):
                    raise _err("cannot compare address with number", e)
                return "bool"
            if not (_numeric(lk) and _numeric(rk)):
                raise _err(f"operator {e.op!r} needs numeric operands", e)
            if e.op in _ARITH:
                return "int"
            return "bool"
        raise _err(f"unknown expression {e!r}")

    def check_assign(self, target, value_kind, node, compound=False):
        if isinstance(target, A.Index):
            target_kind = self.expr_kind(target)
        else:
            target_kind = self.lookup(target.id, target)
            if target_kind == "mapping":
                raise _err(f"mapping {target.id!r} must be indexed", target)
        if target_kind == "address" or value_kind == "address":
            if compound or target_kind != value_kind:
                raise _err("address values can only be copied", node)

    def block(self, body):
        for s in body:
            self.stmt(s)

    def stmt(self, s):
        if isinstance(s, A.LocalDecl):
            if s.name in self.scope or s.name in self.state:
                raise _err(f"redeclaration of {s.name!r}", s)
            k = self.expr_kind(s.expr)
            if (k == "address") != (s.kind == "address"):
                raise _err(f"cannot initialise {s.kind} {s.name!r} from {k}", s)
            self.scope[s.name] = s.kind
        elif isinstance(s, A.Assign):
            self.check_assign(s.target, self.expr_kind(s.expr), s)
        elif isinstance(s, A.CompoundAssign):
            self.check_assign(s.target, self.expr_kind(s.expr), s, compound=True)
        elif isinstance(s, A.If):
            if not _numeric(self.expr_kind(s.cond)):
                raise _err("condition must be numeric or bool", s)
            self.block(s.then)
            self.block(s.orelse)
        elif isinstance(s, A.While):
            if not _numeric(self.expr_kind(s.cond)):
                raise _err("condition must be numeric or bool", s)
            self.block(s.body)
        elif isinstance(s, A.Return):
            if self.fn.returns is None:
                raise _err(f"return in {self.fn.name}, which declares no return type", s)
            if s.expr is None:
                raise _err(f"{self.fn.name} must return a value", s)
            k = self.expr_kind(s.expr)
            if (k == "address") != (self.fn.returns == "address"):
                raise _err(f"{self.fn.name} returns {self.fn.returns}, got {k}", s)


def always_returns(body):
    for s in body:
        if isinstance(s, A.Return):
            return True
        if isinstance(s, A.If) and always_returns(s.then) and always_returns(s.orelse):
            return True
    return False


def validate_contract(contract):
    seen = set()
    for v in contract.state_vars:
        if v.name in seen:
            raise _err(f"duplicate state variable {v.name!r}", v)
        seen.add(v.name)
        if v.initializer is None:
            continue
        if v.kind == "mapping":
            raise _err(f"mapping {v.name!r} cannot have an initializer", v)
        if v.kind == "uint" and not isinstance(v.initializer, bool) and v.initializer < 0:
            raise _err(f"negative initializer for uint {v.name!r}", v)
        if v.kind == "bool" and v.initializer not in (True, False, 0, 1):
            raise _err(f"bool {v.name!r} initialised with {v.initializer}", v)
    names = set()
    for f in contract.functions:
        if f.name in names:
            raise _err(f"duplicate function {f.name!r}", f)
        if f.name in seen:
            raise _err(f"function {f.name!r} clashes with a state variable", f)
        names.add(f.name)
        _FunctionChecker(contract, f).block(f.body)
        if f.returns is not None and not always_returns(f.body):
            raise _err(f"not every path through {f.name} returns", f)


def validate_unit(unit):
    if not unit.contracts:
        raise ValidationError("a source unit needs at least one contract")
    seen = set()
    for c in unit.contracts:
        if c.name in seen:
            raise _err(f"duplicate contract {c.name!r}", c)
        seen.add(c.name)
        validate_contract(c)
