"""IR for TokenLang contracts.

All nodes are frozen dataclasses. Source positions are carried for
diagnostics but excluded from equality, so two parses of differently
formatted but equivalent text compare equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

# State-variable kinds. ``mapping`` is mapping(address => uint).
STATE_KINDS = ("int", "uint", "bool", "mapping")
# Kinds usable for parameters and locals.
VALUE_KINDS = ("int", "uint", "bool", "address")
NUMERIC_KINDS = ("int", "uint", "bool")

COMPOUND_OPS = ("+=", "-=", "*=", "/=")


def _pos():
    return field(default=(0, 0), compare=False, repr=False)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Bool:
    value: bool
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Name:
    id: str
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Index:
    """``base[key]`` where ``base`` names a mapping state variable."""
    base: str
    key: "Expr"
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Sender:
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Tuple[int, int] = _pos()


Expr = Union[Num, Bool, Name, Index, Sender, Unary, Binary]
LValue = Union[Name, Index]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: LValue
    expr: Expr
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class CompoundAssign:
    target: LValue
    op: str
    expr: Expr
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Tuple["Stmt", ...]
    orelse: Tuple["Stmt", ...] = ()
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Tuple["Stmt", ...]
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Return:
    expr: Optional[Expr]
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class LocalDecl:
    name: str
    kind: str
    expr: Expr
    pos: Tuple[int, int] = _pos()


Stmt = Union[Assign, CompoundAssign, If, While, Return, LocalDecl]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class StateVar:
    name: str
    kind: str
    initializer: Optional[int] = None
    pos: Tuple[int, int] = _pos()


@dataclass(frozen=True)
class Param:
    name: str
    kind: str


@dataclass(frozen=True)
class FunctionIR:
    name: str
    params: Tuple[Param, ...]
    body: Tuple[Stmt, ...]
    returns: Optional[str] = None
    owner_only: bool = False
    pos: Tuple[int, int] = _pos()

    @property
    def param_names(self):
        return [p.name for p in self.params]


@dataclass(frozen=True)
class ContractIR:
    name: str
    state_vars: Tuple[StateVar, ...]
    functions: Tuple[FunctionIR, ...]
    pos: Tuple[int, int] = _pos()

    def __post_init__(self):
        # lookup caches; not dataclass fields, so equality is unaffected
        object.__setattr__(self, "_fn_index", {f.name: f for f in self.functions})
        object.__setattr__(self, "_sv_names", frozenset(v.name for v in self.state_vars))
        object.__setattr__(self, "_sv_kinds", {v.name: v.kind for v in self.state_vars})

    def function(self, name) -> Optional[FunctionIR]:
        return self._fn_index.get(name)

    def state_var(self, name) -> Optional[StateVar]:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None

    @property
    def state_var_names(self):
        return self._sv_names

    @property
    def state_var_kinds(self):
        return self._sv_kinds


@dataclass(frozen=True)
class SourceUnit:
    contracts: Tuple[ContractIR, ...]
    source_name: str = field(default="<string>", compare=False)

    def contract(self, name) -> Optional[ContractIR]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None


# -- helpers -----------------------------------------------------------------

def expr_names(expr):
    """Names read by ``expr``. Mapping reads report the mapping name."""
    out = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Name):
            out.add(e.id)
        elif isinstance(e, Index):
            out.add(e.base)
            stack.append(e.key)
        elif isinstance(e, Unary):
            stack.append(e.operand)
        elif isinstance(e, Binary):
            stack.append(e.left)
            stack.append(e.right)
    return out


def target_name(target):
    return target.base if isinstance(target, Index) else target.id


def walk_stmts(body):
    """Pre-order traversal over a statement list, descending into blocks."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from walk_stmts(s.then)
            yield from walk_stmts(s.orelse)
        elif isinstance(s, While):
            yield from walk_stmts(s.body)


def defined_state_vars(contract, fn):
    """State variables written anywhere in ``fn``."""
    svars = contract.state_var_names
    out = set()
    for s in walk_stmts(fn.body):
        if isinstance(s, (Assign, CompoundAssign)):
            name = target_name(s.target)
            if name in svars:
                out.add(name)
    return out
