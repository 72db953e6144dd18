"""Tree-walking interpreter for TokenLang functions.

Values are Python ints (bools are 0/1) and addresses are strings. Every
executed statement and every loop iteration costs one step.
"""
from __future__ import annotations

from ..lang import ast as A
from .errors import RuntimeFault

DEFAULT_STEP_BUDGET = 10_000


def initial_storage(contract):
    storage = {}
    for v in contract.state_vars:
        if v.kind == "mapping":
            storage[v.name] = {}
        elif v.initializer is None:
            storage[v.name] = 0
        else:
            storage[v.name] = int(v.initializer)
    return storage


def _coerce(kind, value, what):
    if kind == "address":
        return value
    if kind == "bool":
        return 1 if value else 0
    if kind in ("uint", "mapping") and value < 0:
        raise RuntimeFault(f"negative value {value} for uint {what}")
    return value


class Interpreter:
    def __init__(self, contract, storage, step_budget=DEFAULT_STEP_BUDGET):
        self.contract = contract
        self.storage = storage
        self.state_kinds = contract.state_var_kinds
        self.step_budget = step_budget
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.steps > self.step_budget:
            raise RuntimeFault(f"step budget of {self.step_budget} exhausted")

    def call(self, fname, args, sender, fn=None):
        """Run one function; each call starts with a fresh step count."""
        fn = fn or self.contract.function(fname)
        if fn is None:
            raise RuntimeFault(f"{self.contract.name} has no function {fname!r}")
        self.steps = 0
        if len(args) != len(fn.params):
            raise RuntimeFault(f"{fname} expects {len(fn.params)} args, got {len(args)}")
        frame = {}
        kinds = {}
        for p, a in zip(fn.params, args):
            kind = p.kind
            if (kind == "address") != (type(a) is str):
                raise RuntimeFault(f"bad argument {a!r} for {kind} {p.name}")
            frame[p.name] = a if kind == "address" else _coerce(kind, a, p.name)
            kinds[p.name] = kind
        self.frame = frame
        self.local_kinds = kinds
        self.sender = sender
        ret = self.block(fn.body)
        return None if ret is None else ret[0]

    # -- statements ----------------------------------------------------------

    def block(self, body):
        """Run ``body``; a ``(value,)`` result means a return statement fired."""
        for s in body:
            ret = self.stmt(s)
            if ret is not None:
                return ret
        return None

    def stmt(self, s):
        self.tick()
        t = type(s)
        if t is A.Assign:
            self.store(s.target, self.eval(s.expr))
        elif t is A.CompoundAssign:
            cur = self.eval(s.target)
            rhs = self.eval(s.expr)
            self.store(s.target, binop(s.op[0], cur, rhs))
        elif t is A.If:
            return self.block(s.then if self.eval(s.cond) else s.orelse)
        elif t is A.Return:
            return (None if s.expr is None else self.eval(s.expr),)
        elif t is A.LocalDecl:
            self.local_kinds[s.name] = s.kind
            self.frame[s.name] = _coerce(s.kind, self.eval(s.expr), s.name)
        elif t is A.While:
            while self.eval(s.cond):
                self.tick()
                ret = self.block(s.body)
                if ret is not None:
                    return ret
        else:
            raise RuntimeFault(f"cannot execute {s!r}")
        return None

    def store(self, target, value):
        if isinstance(target, A.Index):
            key = self.eval(target.key)
            self.storage[target.base][key] = _coerce("mapping", value, f"{target.base}[{key}]")
        elif target.id in self.frame:
            self.frame[target.id] = _coerce(self.local_kinds[target.id], value, target.id)
        else:
            self.storage[target.id] = _coerce(self.state_kinds[target.id], value, target.id)

    # -- expressions ---------------------------------------------------------

    def eval(self, e):
        t = type(e)
        if t is A.Name:
            frame = self.frame
            return frame[e.id] if e.id in frame else self.storage[e.id]
        if t is A.Num:
            return e.value
        if t is A.Binary:
            op = e.op
            if op == "&&":
                return 1 if self.eval(e.left) and self.eval(e.right) else 0
            if op == "||":
                return 1 if self.eval(e.left) or self.eval(e.right) else 0
            return binop(op, self.eval(e.left), self.eval(e.right))
        if t is A.Index:
            return self.storage[e.base].get(self.eval(e.key), 0)
        if t is A.Unary:
            v = self.eval(e.operand)
            return (1 if v == 0 else 0) if e.op == "!" else -v
        if t is A.Bool:
            return 1 if e.value else 0
        if t is A.Sender:
            return self.sender
        raise RuntimeFault(f"cannot evaluate {e!r}")

    def arith(self, op, a, b):
        return binop(op, a, b)


_ARITH = {
    "+": int.__add__, "-": int.__sub__, "*": int.__mul__,
}


def binop(op, a, b):
    f = _ARITH.get(op)
    if f is not None and type(a) is int and type(b) is int:
        return f(a, b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise RuntimeFault("division by zero")
        return a // b
    if op == "==":
        return 1 if a == b else 0
    if op == "!=":
        return 1 if a != b else 0
    if op == "<":
        return 1 if a < b else 0
    if op == "<=":
        return 1 if a <= b else 0
    if op == ">":
        return 1 if a > b else 0
    if op == ">=":
        return 1 if a >= b else 0
    if op == "&&":
        return 1 if a and b else 0
    if op == "||":
        return 1 if a or b else 0
    raise RuntimeFault(f"unknown operator {op!r}")


def eval_expr(e, env):
    """Evaluate a free-standing expression over a symbol environment.

    Used for path constraints and search relations, where names are
    renamed symbols rather than contract variables.
    """
    if isinstance(e, A.Num):
        return e.value
    if isinstance(e, A.Bool):
        return 1 if e.value else 0
    if isinstance(e, A.Name):
        try:
            return env[e.id]
        except KeyError:
            raise KeyError(f"unbound symbol {e.id!r}") from None
    if isinstance(e, A.Unary):
        v = eval_expr(e.operand, env)
        return (1 if v == 0 else 0) if e.op == "!" else -v
    if isinstance(e, A.Binary):
        return binop(e.op, eval_expr(e.left, env), eval_expr(e.right, env))
    raise ValueError(f"cannot evaluate {e!r} symbolically")
