"""Token models: builtin ERC-20, builtin multiplicative rebase, interpreted TokenLang."""
from __future__ import annotations

import copy

from ..lang import ast as A
from .errors import InsufficientBalance, RuntimeFault, Unauthorized
from .interp import DEFAULT_STEP_BUDGET, Interpreter, initial_storage

ONE = 10 ** 18


def _check_amount(amount):
    if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0:
        raise RuntimeFault(f"invalid amount {amount!r}")


class Token:
    model = "abstract"
    # Name of the scanned contract this token stands in for (watch-list binding).
    implements = None
    # Functions that change supply by design; everything else must conserve it.
    supply_functions = frozenset()

    def __init__(self, token_id, owner=None):
        self.token_id = token_id
        self.owner = owner

    def functions(self):
        raise NotImplementedError

    def balance_of(self, account):
        raise NotImplementedError

    def known_accounts(self):
        raise NotImplementedError

    def transfer(self, sender, to, amount):
        raise NotImplementedError

    def credit(self, account, amount):
        """Fixture seeding: give ``account`` roughly ``amount`` more tokens."""
        raise NotImplementedError

    def call(self, sender, function, args):
        if function == "balanceOf":
            (account,) = args
            return self.balance_of(account)
        if function == "transfer":
            to, amount = args
            self.transfer(sender, to, amount)
            return None
        raise RuntimeFault(f"token {self.token_id} has no function {function!r}")

    def clone(self):
        return copy.deepcopy(self)

    def state(self):
        raise NotImplementedError

    def require_owner(self, sender, function):
        if self.owner is not None and sender != self.owner:
            raise Unauthorized(f"{function} on {self.token_id} is owner-only")


class BuiltinERC20(Token):
    model = "erc20"
    supply_functions = frozenset({"mint", "burn"})

    def __init__(self, token_id, balances=None, owner=None):
        super().__init__(token_id, owner)
        self.balances = {a: b for a, b in (balances or {}).items() if b}

    def functions(self):
        return {"balanceOf", "transfer", "mint", "burn"}

    def balance_of(self, account):
        return self.balances.get(account, 0)

    def known_accounts(self):
        return set(self.balances)

    def transfer(self, sender, to, amount):
        _check_amount(amount)
        have = self.balances.get(sender, 0)
        if have < amount:
            raise InsufficientBalance(f"{sender} holds {have} {self.token_id}, needs {amount}")
        self.balances[sender] = have - amount
        self.balances[to] = self.balances.get(to, 0) + amount

    def credit(self, account, amount):
        _check_amount(amount)
        self.balances[account] = self.balances.get(account, 0) + amount

    def debit(self, account, amount):
        have = self.balances.get(account, 0)
        if have < amount:
            raise InsufficientBalance(f"{account} holds {have} {self.token_id}, needs {amount}")
        self.balances[account] = have - amount

    def call(self, sender, function, args):
        # mint/burn are reserved for the pool that owns this token (LP tokens).
        if function == "mint":
            self.require_owner(sender, function)
            to, amount = args
            self.credit(to, amount)
            return None
        if function == "burn":
            self.require_owner(sender, function)
            frm, amount = args
            self.debit(frm, amount)
            return None
        return super().call(sender, function, args)

    def clone(self):
        t = BuiltinERC20.__new__(BuiltinERC20)
        t.token_id, t.owner, t.implements = self.token_id, self.owner, self.implements
        t.balances = dict(self.balances)
        return t

    def state(self):
        return {"balances": {a: b for a, b in sorted(self.balances.items()) if b}}


class BuiltinRebase(Token):
    """Elastic-supply token: ``balanceOf(a) = base[a] * scale / 1e18``.

    ``rebase(t)`` multiplies ``scale`` by ``t``; ``rebase_div(d)`` divides it,
    which is how a fractional (negative) rebase is expressed.
    """
    model = "rebase"
    supply_functions = frozenset({"rebase", "rebase_div"})

    def __init__(self, token_id, balances=None, owner=None, scale=ONE):
        super().__init__(token_id, owner)
        self.scale = scale
        self.base = {}
        for a, b in (balances or {}).items():
            if b:
                self.credit(a, b)

    def functions(self):
        return {"balanceOf", "transfer", "rebase", "rebase_div"}

    def balance_of(self, account):
        return self.base.get(account, 0) * self.scale // ONE

    def known_accounts(self):
        return set(self.base)

    def transfer(self, sender, to, amount):
        _check_amount(amount)
        if self.scale == 0:
            raise RuntimeFault("division by zero")
        units = amount * ONE // self.scale
        have = self.base.get(sender, 0)
        if have < units:
            raise InsufficientBalance(
                f"{sender} holds {self.balance_of(sender)} {self.token_id}, needs {amount}")
        self.base[sender] = have - units
        self.base[to] = self.base.get(to, 0) + units

    def credit(self, account, amount):
        _check_amount(amount)
        if self.scale == 0:
            raise RuntimeFault("division by zero")
        self.base[account] = self.base.get(account, 0) + amount * ONE // self.scale

    def call(self, sender, function, args):
        if function == "rebase":
            self.require_owner(sender, function)
            (t,) = args
            _check_amount(t)
            self.scale *= t
            return None
        if function == "rebase_div":
            self.require_owner(sender, function)
            (d,) = args
            _check_amount(d)
            if d == 0:
                raise RuntimeFault("division by zero")
            self.scale //= d
            return None
        return super().call(sender, function, args)

    def clone(self):
        t = BuiltinRebase.__new__(BuiltinRebase)
        t.token_id, t.owner, t.scale = self.token_id, self.owner, self.scale
        t.implements = self.implements
        t.base = dict(self.base)
        return t

    def state(self):
        return {"scale": self.scale,
                "base": {a: b for a, b in sorted(self.base.items()) if b}}


def balance_mapping(contract):
    """The mapping that ``balanceOf`` reads, falling back to the first mapping."""
    mappings = [v.name for v in contract.state_vars if v.kind == "mapping"]
    fn = contract.function("balanceOf")
    if fn is not None:
        for s in A.walk_stmts(fn.body):
            exprs = []
            if isinstance(s, (A.LocalDecl, A.Assign, A.CompoundAssign)):
                exprs.append(s.expr)
            elif isinstance(s, (A.If, A.While)):
                exprs.append(s.cond)
            elif isinstance(s, A.Return) and s.expr is not None:
                exprs.append(s.expr)
            for e in exprs:
                for name in sorted(A.expr_names(e)):
                    if name in mappings:
                        return name
    return mappings[0] if mappings else None


class InterpretedToken(Token):
    model = "contract"

    def __init__(self, token_id, contract, owner=None, storage=None,
                 step_budget=DEFAULT_STEP_BUDGET):
        super().__init__(token_id, owner)
        self.contract = contract
        self.storage = storage if storage is not None else initial_storage(contract)
        self.step_budget = step_budget
        self._balance_map = balance_mapping(contract)
        self.implements = contract.name

    def functions(self):
        return {f.name for f in self.contract.functions}

    def run(self, sender, function, args):
        fn = self.contract.function(function)
        if fn is None:
            raise RuntimeFault(f"{self.contract.name} has no function {function!r}")
        if fn.owner_only:
            self.require_owner(sender, function)
        interp = self.__dict__.get("_interp")
        if (interp is None or interp.storage is not self.storage
                or interp.step_budget != self.step_budget):
            interp = self._interp = Interpreter(self.contract, self.storage, self.step_budget)
        return interp.call(function, list(args), sender, fn)

    def balance_of(self, account):
        return self.run(account, "balanceOf", [account])

    def known_accounts(self):
        out = set()
        for v in self.storage.values():
            if isinstance(v, dict):
                out.update(v)
        return out

    def transfer(self, sender, to, amount):
        _check_amount(amount)
        if self.contract.function("transfer") is None:
            raise RuntimeFault(f"{self.contract.name} has no transfer")
        self.run(sender, "transfer", [to, amount])

    def credit(self, account, amount):
        _check_amount(amount)
        if self._balance_map is None:
            raise RuntimeFault(f"{self.contract.name} has no balance mapping")
        m = self.storage[self._balance_map]
        m[account] = m.get(account, 0) + amount

    def call(self, sender, function, args):
        return self.run(sender, function, args)

    def clone(self):
        t = InterpretedToken.__new__(InterpretedToken)
        t.token_id, t.owner = self.token_id, self.owner
        t.contract = self.contract  # immutable IR, shared
        t.storage = {k: (dict(v) if isinstance(v, dict) else v)
                     for k, v in self.storage.items()}
        t.step_budget = self.step_budget
        t._balance_map = self._balance_map
        t.implements = self.implements
        return t

    def state(self):
        return {k: (dict(sorted(v.items())) if isinstance(v, dict) else v)
                for k, v in sorted(self.storage.items())}
