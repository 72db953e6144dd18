"""Bundle synthesis, profit maximisation, replay verification and tournament."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..sim.chain import Tx, apply_tx, exec_bundle
from ..sim.errors import SimError, StaleState
from ..sim.pools import ACTION_FUNCTIONS
from .templates import POOL_P, POOL_Q, VICTIM

log = logging.getLogger(__name__)

NEG_INF = -math.inf
INVPHI = (math.sqrt(5) - 1) / 2
DEFAULT_MAX_EVALS = 5000
REFINE_ITERS = 20


class SolverTimeout(Exception):
    pass


@dataclass
class MevPlan:
    template_id: str
    bundle: List[Tx]
    solved_args: Dict[str, int]
    profit: int
    victim_tx_id: str
    searcher: str = ""
    token_x: str = ""
    token_y: str = ""
    pool_bindings: Dict[str, str] = field(default_factory=dict)
    legs: List[str] = field(default_factory=list)
    pre_txs: List[Tx] = field(default_factory=list)
    pre_state_digest: str = ""
    x_gain: int = 0
    residual_y: int = 0
    value_residual_y: bool = False

    def to_json(self):
        return {
            "template_id": self.template_id,
            "victim_tx_id": self.victim_tx_id,
            "profit": self.profit,
            "x_gain": self.x_gain,
            "residual_y": self.residual_y,
            "value_residual_y": self.value_residual_y,
            "solved_args": dict(self.solved_args),
            "searcher": self.searcher,
            "token_x": self.token_x,
            "token_y": self.token_y,
            "pool_bindings": dict(self.pool_bindings),
            "legs": list(self.legs),
            "pre_state_digest": self.pre_state_digest,
            "pre_txs": [t.to_json() for t in self.pre_txs],
            "bundle": [t.to_json() for t in self.bundle],
        }

    @classmethod
    def from_json(cls, doc):
        def txs(items):
            return [Tx(t["sender"], t["target"], t["function"], tuple(t.get("args", ())))
                    for t in items]
        return cls(doc["template_id"], txs(doc["bundle"]), dict(doc.get("solved_args", {})),
                   int(doc["profit"]), doc.get("victim_tx_id", ""), doc.get("searcher", ""),
                   doc.get("token_x", ""), doc.get("token_y", ""),
                   dict(doc.get("pool_bindings", {})), list(doc.get("legs", [])),
                   txs(doc.get("pre_txs", [])), doc.get("pre_state_digest", ""),
                   int(doc.get("x_gain", doc["profit"])), int(doc.get("residual_y", 0)),
                   bool(doc.get("value_residual_y", False)))


# -- bundle synthesis --------------------------------------------------------------

def spot_value(state, pool_id, amount_y):
    """Value ``amount_y`` of the pool's Y in X at its fixed or reserve spot price."""
    pool = state.pool(pool_id)
    if pool.kind == "lending_fixed":
        return amount_y * pool.price_den // pool.price_num
    if pool.kind == "balance_cpmm":
        rx, ry = state.balance(pool.token_x, pool_id), state.balance(pool.token_y, pool_id)
    else:
        rx, ry = pool.reserve_x, pool.reserve_y
    return amount_y * rx // ry if ry else 0


def residual_value(dc, residual_y):
    if residual_y <= 0:
        return 0
    slot = POOL_Q if POOL_Q in dc.static.pool_bindings else POOL_P
    return spot_value(dc.pre_state, dc.static.pool_bindings[slot], residual_y)


def synthesize(dc, dx):
    """Build the concrete bundle for ``dx`` by stepping through the legs.

    Each searcher leg after the first spends exactly what the searcher
    acquired of its input token. Returns ``(txs, x_gain, residual_y)`` or
    ``None`` when some leg cannot execute.
    """
    work = dc.pre_state.snapshot()
    s, tx_, ty_ = dc.searcher, dc.token_x, dc.token_y
    x0, y0 = work.balance(tx_, s), work.balance(ty_, s)
    acquired = {}
    spent_dx = False
    txs = []
    try:
        for leg in dc.template.all_legs:
            if leg.actor == VICTIM:
                tx = dc.victim
                if ty_ in acquired:
                    before = work.balance(ty_, s)
                    apply_tx(work, tx, track=False)
                    acquired[ty_] += work.balance(ty_, s) - before
                else:
                    apply_tx(work, tx, track=False)
                txs.append(tx)
                continue
            pid = dc.static.pool_bindings[leg.venue]
            kind = dc.static.pool_kinds[leg.venue]
            t_in, t_out = (tx_, ty_) if leg.action == "swap_xy" else (ty_, tx_)
            if t_in in acquired:
                amount = acquired.pop(t_in)
            elif t_in == tx_ and not spent_dx:
                amount, spent_dx = dx, True
            else:
                return None
            if amount <= 0:
                return None
            tx = Tx(s, pid, ACTION_FUNCTIONS[kind][leg.action], (amount,))
            before = work.balance(t_out, s)
            apply_tx(work, tx, track=False)
            acquired[t_out] = work.balance(t_out, s) - before
            txs.append(tx)
    except SimError:
        return None
    return txs, work.balance(tx_, s) - x0, work.balance(ty_, s) - y0


def sim_objective(dc, dx, value_residual_y=False):
    res = synthesize(dc, dx)
    if res is None:
        return None
    _, gain, residual = res
    if residual < 0:
        return None  # side condition: the searcher must not end with less Y
    return gain + (residual_value(dc, residual) if value_residual_y else 0)


# -- search ------------------------------------------------------------------------

class _Counter:
    def __init__(self, f, cap):
        self.f, self.cap, self.n, self.cache = f, cap, 0, {}

    def __call__(self, x):
        if x not in self.cache:
            self.n += 1
            if self.n > self.cap:
                raise SolverTimeout(f"evaluation cap of {self.cap} reached")
            v = self.f(x)
            self.cache[x] = NEG_INF if v is None else v
        return self.cache[x]

    def best(self):
        return max(self.cache.items(), key=lambda kv: (kv[1], -kv[0]))


def golden_max(f, lo, hi):
    """Integer golden-section search for the maximum of a unimodal ``f``."""
    a, b = lo, hi
    while b - a > 4:
        c = b - int(round((b - a) * INVPHI))
        d = a + int(round((b - a) * INVPHI))
        if c >= d:
            c, d = (a + b) // 2, (a + b) // 2 + 1
        if f(c) >= f(d):
            b = d
        else:
            a = c
    return max(range(a, b + 1), key=lambda x: (f(x), -x))


def solve(dc, budget, max_evals=DEFAULT_MAX_EVALS, value_residual_y=False):
    """Maximise searcher profit over ``dX`` in ``[1, budget]``.

    Returns a replay-verified :class:`MevPlan` or ``None`` if the best
    profit is not positive.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    if not dc.feasible:
        return None
    f = _Counter(lambda x: sim_objective(dc, x, value_residual_y), max_evals)
    f(1)
    f(budget)
    if dc.monotone and f(budget) > NEG_INF:
        best_dx = budget
    else:
        model = _Counter(lambda x: dc.model_profit(x), max_evals)
        f(golden_max(model, 1, budget))
        f(golden_max(f, 1, budget))
        best_dx, best = f.best()
        width = max(1, budget // 64)
        for _ in range(REFINE_ITERS):
            lo, hi = max(1, best_dx - width), min(budget, best_dx + width)
            f(golden_max(f, lo, hi))
            cand_dx, cand = f.best()
            improvement = cand - best
            best_dx, best = cand_dx, cand
            if improvement < 1 and width == 1:
                break
            width = max(1, width // 4)
    best = f(best_dx)
    if best == NEG_INF or best <= 0:
        return None
    return make_plan(dc, best_dx, value_residual_y)


def make_plan(dc, dx, value_residual_y=False):
    txs, _, _ = synthesize(dc, dx)
    # replay the exact bundle from the pre-state before emitting it
    post, _ = exec_bundle(dc.pre_state, txs, track=False)
    pre = dc.pre_state
    gain = post.balance(dc.token_x, dc.searcher) - pre.balance(dc.token_x, dc.searcher)
    residual = post.balance(dc.token_y, dc.searcher) - pre.balance(dc.token_y, dc.searcher)
    profit = gain + (residual_value(dc, residual) if value_residual_y else 0)
    if residual < 0 or profit <= 0:
        return None
    return MevPlan(dc.template.id, txs, {"dX": dx}, profit, dc.victim_id, dc.searcher,
                   dc.token_x, dc.token_y, dict(dc.static.pool_bindings),
                   [str(leg) for leg in dc.template.all_legs], list(dc.pre_txs),
                   pre.digest(), gain, residual, value_residual_y)


def tournament(plans):
    """Highest profit wins; ties go to fewer legs, then the smaller template id."""
    live = [p for p in plans if p is not None and p.profit > 0]
    if not live:
        return None
    return min(live, key=lambda p: (-p.profit, len(p.bundle), p.template_id))


# -- replay ------------------------------------------------------------------------

@dataclass
class ReplayResult:
    ok: bool
    profit: int
    x_gain: int
    residual_y: int
    error: str = ""


def replay_plan(state, plan):
    """Re-execute ``plan`` from ``state``; raises StaleState on digest mismatch."""
    pre = state
    if plan.pre_txs:
        pre, _ = exec_bundle(state, plan.pre_txs, track=False)
    if plan.pre_state_digest and pre.digest() != plan.pre_state_digest:
        raise StaleState(f"pre-state digest {pre.digest()} != plan's {plan.pre_state_digest}")
    post, _ = exec_bundle(pre, plan.bundle, track=False)
    gain = post.balance(plan.token_x, plan.searcher) - pre.balance(plan.token_x, plan.searcher)
    residual = post.balance(plan.token_y, plan.searcher) - pre.balance(plan.token_y, plan.searcher)
    profit = gain
    if plan.value_residual_y and residual > 0:
        slot = POOL_Q if POOL_Q in plan.pool_bindings else POOL_P
        profit += spot_value(pre, plan.pool_bindings[slot], residual)
    ok = profit == plan.profit and residual >= 0
    err = "" if ok else f"recorded profit {plan.profit}, replayed {profit} (residual Y {residual})"
    return ReplayResult(ok, profit, gain, residual, err)
