"""Static constraint generation, feasibility filtering and dynamic instantiation.

A constraint's relations are an ordered list of symbol definitions
``name = expr`` over TokenLang expressions. Evaluating them in order with
the pool state, victim placeholders and the searcher's ``dX`` bound yields
the modelled ``profit``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from ..lang import ast as A
from ..lang.printer import format_expr
from ..scan import TSC_CLASSES, TPath
from ..sim.chain import Tx, apply_tx, pitex_test
from ..sim.errors import SimError, StaleState
from ..sim.interp import eval_expr
from ..sim.pools import BPS
from .templates import POOL_P, POOL_Q, SEARCHER, TOKEN, VICTIM, Template

log = logging.getLogger(__name__)

FEASIBILITY_DOMAIN = (0, 1, 2, 10, 1000)
MAX_FEASIBILITY_POINTS = 4096
SWAP_KINDS = ("reserve_cpmm", "balance_cpmm", "conc_tick")


@dataclass(frozen=True)
class PoolInfo:
    pool_id: str
    kind: str
    token_x: str
    token_y: str
    fee_bps: int
    pitex: str  # sensitive | insensitive


def classify_pools(state, token_y, token_x=None):
    """PITEX-classify every pool trading ``token_y`` (against ``token_x`` if given)."""
    out = []
    for pid, pool in sorted(state.pools.items()):
        if pool.token_y != token_y or (token_x is not None and pool.token_x != token_x):
            continue
        live = state.balance(token_y, pid)
        probe = max(1000, live // 100)
        try:
            verdict = pitex_test(state, pid, token_y, probe, probe)
        except SimError as exc:
            log.warning("pitex probe of %s failed: %s", pid, exc)
            continue
        out.append(PoolInfo(pid, pool.kind, pool.token_x, pool.token_y, pool.fee_bps, verdict))
    return out


# -- relation model ------------------------------------------------------------

def _n(name):
    return A.Name(name)


def _bin(op, a, b):
    return A.Binary(op, a, b)


class _ModelBuilder:
    def __init__(self, bindings, token_x):
        self.bindings = bindings  # slot -> PoolInfo
        self.token_x = token_x
        self.defs = []
        self.ver = {}
        self.state_symbols = set()
        self.acquired = {"X": None, "Y": None}
        self.net_x = None
        self.spent_dx = False
        self.outs = 0

    def cur(self, base):
        v = self.ver.get(base, 0)
        if v == 0:
            self.state_symbols.add(f"{base}_0")
        return _n(f"{base}_{v}")

    def define(self, base, expr):
        v = self.ver.get(base, 0) + 1
        self.ver[base] = v
        self.defs.append((f"{base}_{v}", expr))
        return _n(f"{base}_{v}")

    def _state_names(self, slot):
        info = self.bindings[slot]
        if info.kind == "balance_cpmm":
            return f"{slot}_bx", f"{slot}_by"
        return f"{slot}_rx", f"{slot}_ry"

    def exchange(self, slot, x_in, amount):
        info = self.bindings[slot]
        if info.kind == "lending_fixed":
            num, den = f"{slot}_num", f"{slot}_den"
            self.state_symbols |= {num, den}
            if x_in:
                out = _bin("/", _bin("*", amount, _n(num)), _n(den))
            else:
                out = _bin("/", _bin("*", amount, _n(den)), _n(num))
            return self.define("o", out)
        bx, by = self._state_names(slot)
        b_in, b_out = (bx, by) if x_in else (by, bx)
        eff = amount
        if info.fee_bps:
            eff = _bin("/", _bin("*", amount, A.Num(BPS - info.fee_bps)), A.Num(BPS))
        eff = self.define("eff", eff)
        r_in, r_out = self.cur(b_in), self.cur(b_out)
        out = self.define("o", _bin("/", _bin("*", r_out, eff), _bin("+", r_in, eff)))
        grow = amount if info.kind == "balance_cpmm" else eff
        self.define(b_in, _bin("+", r_in, grow))
        self.define(b_out, _bin("-", r_out, out))
        return out

    def searcher_leg(self, slot, action):
        x_in = action == "swap_xy"
        t_in, t_out = ("X", "Y") if x_in else ("Y", "X")
        if self.acquired[t_in] is not None:
            amount = self.acquired[t_in]
        elif t_in == "X" and not self.spent_dx:
            amount = _n("dX")
            self.spent_dx = True
        else:
            raise ValueError(f"leg {action}@{slot} has nothing to spend")
        self.acquired[t_in] = None
        out = self.exchange(slot, x_in, amount)
        self.acquired[t_out] = out
        if t_in == "X":
            self.net_x = _bin("-", self.net_x, amount) if self.net_x is not None \
                else A.Unary("-", amount)
        if t_out == "X":
            self.net_x = _bin("+", self.net_x, out) if self.net_x is not None else out
            self.net_x = self.define("net", self.net_x)

    def tsc(self, g_form):
        def apply(e):
            if g_form == "difference":
                return _bin("+", e, _n("g_diff"))
            return _bin("/", _bin("*", e, _n("g_num")), _n("g_den"))
        if self.acquired["Y"] is not None:
            self.acquired["Y"] = self.define("hy", apply(self.acquired["Y"]))
        for slot in sorted(self.bindings):
            if self.bindings[slot].kind == "balance_cpmm":
                by = f"{slot}_by"
                self.define(by, apply(self.cur(by)))

    def whale_swap(self, slot):
        self.exchange(slot, True, _n("v_amount"))

    def profit(self):
        self.defs.append(("profit", self.net_x if self.net_x is not None else A.Num(0)))


def build_relations(template, bindings, g_form, token_x="X"):
    m = _ModelBuilder(bindings, token_x)
    for leg in template.all_legs:
        if leg.actor == SEARCHER:
            m.searcher_leg(leg.venue, leg.action)
        elif leg.action == "tsc_call":
            m.tsc(g_form)
        else:
            m.whale_swap(leg.venue)
    m.profit()
    return m.defs, m.state_symbols


def eval_relations(relations, env):
    """Evaluate definitions in order; returns the extended environment."""
    env = dict(env)
    for name, expr in relations:
        env[name] = eval_expr(expr, env)
    return env


# -- static constraints --------------------------------------------------------

@dataclass
class StaticConstraint:
    template_id: str
    tpath: Optional[TPath]
    token: str
    token_x: str
    pool_bindings: Dict[str, str]
    pool_kinds: Dict[str, str]
    symbolic_vars: Tuple[str, ...]
    victim_placeholders: Tuple[str, ...]
    state_symbols: Tuple[str, ...]
    relations: List[Tuple[str, A.Expr]]
    path_constraints: List = field(default_factory=list)
    g_form: Optional[str] = None
    objective: str = "profit"

    @property
    def watch_key(self):
        if self.tpath is None:  # B0: the victim is a swap on p
            return (self.pool_bindings[POOL_P], "swap_xy", ())
        trig = self.tpath.trigger
        return (self.token, trig[-1], tuple(trig[:-1]))

    def describe(self):
        pools = ",".join(f"{k}={v}" for k, v in sorted(self.pool_bindings.items()))
        trig = "->".join(self.tpath.trigger) if self.tpath else "swap"
        return f"{self.template_id}[{pools}] {trig}"

    def to_json(self):
        return {
            "template_id": self.template_id,
            "token": self.token,
            "pool_bindings": dict(self.pool_bindings),
            "trigger": list(self.tpath.trigger) if self.tpath else None,
            "symbolic_vars": list(self.symbolic_vars),
            "relations": [f"{n} = {format_expr(e)}" for n, e in self.relations],
            "path_constraints": [format_expr(c) for c in self.path_constraints],
        }


def statically_feasible(constraints, domain=FEASIBILITY_DOMAIN):
    """Bounded search for an assignment satisfying every path constraint.

    Symbols range over ``domain``; too large a space is assumed feasible.
    """
    if not constraints:
        return True
    names = sorted(set().union(*(A.expr_names(c) for c in constraints)))
    if len(domain) ** len(names) > MAX_FEASIBILITY_POINTS:
        return True
    for values in itertools.product(domain, repeat=len(names)):
        env = dict(zip(names, values))
        try:
            if all(eval_expr(c, env) for c in constraints):
                return True
        except (SimError, ValueError, KeyError):
            continue
    return False


def _slot_candidates(template, slot, pools):
    if slot == POOL_Q:
        return [p for p in pools if p.pitex == "insensitive"]
    if template.id == "B0":
        return [p for p in pools if p.kind in SWAP_KINDS]
    return [p for p in pools if p.pitex == "sensitive"]


def _victim_placeholders(template, tpath, contract_params):
    if template.id == "B0":
        return ("v_amount",)
    names = tuple(f"v_{p}" for p in contract_params)
    return names


def gen_static_constraints(report, pools, templates, token, token_x, contract=None):
    """Cross tPaths x templates x pool assignments, dropping unsatisfiable ones."""
    out = []
    seen = set()
    tpaths = [tp for tp in (report.tpaths if report else [])
              if tp.classification == "tsc1_and_tsc2"]
    for template in templates:
        slots = template.slots
        choices = [_slot_candidates(template, s, pools) for s in slots]
        if any(not c for c in choices):
            log.debug("%s: no pool for some slot of %s", token, template.id)
            continue
        for combo in itertools.product(*choices):
            bindings = dict(zip(slots, combo))
            if len({b.pool_id for b in combo}) != len(combo):
                continue
            paths = [None] if not template.needs_tsc else tpaths
            for tp in paths:
                g_form = tp.g_form if tp is not None else None
                if template.needs_tsc and g_form not in ("ratio", "difference"):
                    g_form = "ratio"
                if tp is not None and not statically_feasible(tp.constraints):
                    log.info("static solver drops %s for %s", template.id, "->".join(tp.trigger))
                    continue
                key = (template.id, tuple(sorted((s, b.pool_id) for s, b in bindings.items())),
                       tuple(tp.trigger) if tp else None,
                       tuple(format_expr(c) for c in tp.constraints) if tp else (), g_form)
                if key in seen:
                    continue
                seen.add(key)
                relations, state_syms = build_relations(template, bindings, g_form, token_x)
                params = ()
                if tp is not None and contract is not None:
                    fn = contract.function(tp.trigger[-1])
                    params = tuple(fn.param_names) if fn is not None else ()
                placeholders = _victim_placeholders(template, tp, params)
                if template.needs_tsc:
                    placeholders += (("g_diff",) if g_form == "difference"
                                     else ("g_num", "g_den"))
                out.append(StaticConstraint(
                    template.id, tp, token, token_x,
                    {s: b.pool_id for s, b in bindings.items()},
                    {s: b.kind for s, b in bindings.items()},
                    ("dX",), placeholders, tuple(sorted(state_syms)), relations,
                    list(tp.constraints) if tp else [], g_form))
    return out


# -- dynamic instantiation -------------------------------------------------------

@dataclass
class DynamicConstraint:
    static: StaticConstraint
    template: Template
    victim: Tx
    victim_id: str
    pre_txs: List[Tx]
    pre_state: object
    searcher: str
    token_x: str
    token_y: str
    env: Dict[str, int]
    free_vars: Tuple[str, ...] = ("dX",)
    feasible: bool = True
    reason: str = ""
    g: Optional[Fraction] = None
    sign: int = 0

    def model_profit(self, dx):
        try:
            env = eval_relations(self.static.relations, {**self.env, "dX": dx})
        except (SimError, ValueError, KeyError):
            return None
        for k, v in env.items():
            # reserves or balances driven negative mean the trade cannot happen
            if k.startswith(("pool_", "o_")) and v < 0:
                return None
        return env["profit"]

    @property
    def monotone(self):
        """Objective known to be nondecreasing in dX (closed form: take the cap)."""
        kinds = set(self.static.pool_kinds.values())
        if kinds == {"lending_fixed"} and self.sign > 0:
            return self.template.id == "D1_plus"
        if (self.template.id == "D1_plus" and self.static.g_form == "ratio"
                and self.g is not None and self.g > 1
                and kinds <= {"reserve_cpmm", "conc_tick"}):
            pool = self.pre_state.pool(self.static.pool_bindings[POOL_Q])
            return pool.fee_bps == 0
        return False


def _holder_balances(state, token):
    tok = state.token(token)
    return {a: tok.balance_of(a) for a in sorted(state.accounts())}


def _victim_g(state, victim, token, g_form):
    snap = state.snapshot()
    y0 = _holder_balances(snap, token)
    apply_tx(snap, victim, track=False)
    y1 = _holder_balances(snap, token)
    ranked = sorted((a for a in y0 if y0[a] > 0), key=lambda a: (-y0[a], a))
    if not ranked:
        return None
    a = ranked[0]
    if g_form == "difference":
        return Fraction(y1.get(a, 0) - y0[a])
    return Fraction(y1.get(a, 0), y0[a])


def _path_constraints_hold(sc, calls, state_before, token):
    """Evaluate path constraints whose symbols are all bound; unbound ones pass."""
    env = {}
    tok = state_before.token(token)
    storage = getattr(tok, "storage", None) or {}
    for k, v in storage.items():
        if not isinstance(v, dict):
            env[f"{k}_0"] = v
    contract = getattr(tok, "contract", None)
    for k, tx in enumerate(calls):
        fn = contract.function(tx.function) if contract is not None else None
        if fn is None:
            continue
        for p, a in zip(fn.param_names, tx.args):
            if not isinstance(a, str):
                env[f"{p}_c{k}"] = a
    for c in sc.path_constraints:
        if not A.expr_names(c) <= set(env):
            continue
        try:
            if not eval_expr(c, env):
                return False, f"path constraint {format_expr(c)} fails"
        except (SimError, ValueError, KeyError):
            continue
    return True, ""


def instantiate_dynamic(sc, victim, state, searcher, template, victim_id="",
                        pre_txs=(), token_y=None):
    """Bind victim arguments and current pool state into ``sc``."""
    for pid in sc.pool_bindings.values():
        if pid not in state.pools:
            raise StaleState(f"pool {pid!r} missing from state")
    token_y = token_y or (sc.token if template.needs_tsc
                          else state.pools[sc.pool_bindings[POOL_P]].token_y)
    if token_y not in state.tokens or sc.token_x not in state.tokens:
        raise StaleState(f"token {token_y!r} or {sc.token_x!r} missing from state")
    dc = DynamicConstraint(sc, template, victim, victim_id, list(pre_txs), None,
                           searcher, sc.token_x, token_y, {})
    ok, reason = (True, "")
    if sc.tpath is not None:
        ok, reason = _path_constraints_hold(sc, list(pre_txs) + [victim], state, token_y)
    pre = state.snapshot()
    try:
        for tx in pre_txs:
            apply_tx(pre, tx, track=False)
    except SimError as exc:
        ok, reason = False, f"prefix transaction faults: {exc}"
    dc.pre_state = pre
    env = {}
    for slot, pid in sc.pool_bindings.items():
        pool = pre.pool(pid)
        if pool.kind == "lending_fixed":
            env[f"{slot}_num"], env[f"{slot}_den"] = pool.price_num, pool.price_den
        elif pool.kind == "balance_cpmm":
            env[f"{slot}_bx_0"] = pre.balance(pool.token_x, pid)
            env[f"{slot}_by_0"] = pre.balance(pool.token_y, pid)
        else:
            env[f"{slot}_rx_0"], env[f"{slot}_ry_0"] = pool.reserve_x, pool.reserve_y
    if template.id == "B0":
        if victim.function != "swap_xy" or not victim.args:
            ok, reason = False, "victim is not an X-to-Y swap"
        else:
            env["v_amount"] = victim.args[0]
    else:
        for name, a in zip(sc.victim_placeholders, victim.args):
            if name.startswith("v_") and not isinstance(a, str):
                env[name] = a
        if ok:
            try:
                g = _victim_g(pre, victim, token_y, sc.g_form)
            except SimError as exc:
                g, ok, reason = None, False, f"victim transaction faults: {exc}"
            if ok and g is None:
                ok, reason = False, "token has no holders"
            if ok:
                dc.g = g
                if sc.g_form == "difference":
                    env["g_diff"] = int(g)
                    dc.sign = (g > 0) - (g < 0)
                else:
                    env["g_num"], env["g_den"] = g.numerator, g.denominator
                    dc.sign = (g > 1) - (g < 1)
                if dc.sign and template.sign and dc.sign != template.sign:
                    ok, reason = False, "TSC direction does not fit the template"
    dc.env = env
    dc.feasible, dc.reason = ok, reason
    return dc
