"""Chain state, transaction execution, atomic bundles and the PITEX test."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import BundleReverted, RuntimeFault, SimError, UnknownTarget
from .pools import ConcTick, LendingFixed, ReserveCPMM
from .tokens import BuiltinERC20

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tx:
    sender: str
    target: str
    function: str
    args: Tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def to_line(self):
        return " ".join([self.sender, self.target, self.function] + [str(a) for a in self.args])

    def to_json(self):
        return {"sender": self.sender, "target": self.target,
                "function": self.function, "args": list(self.args)}


@dataclass
class ExecReceipt:
    ok: bool
    outputs: List = field(default_factory=list)
    balance_deltas: Dict[Tuple[str, str], int] = field(default_factory=dict)
    error: str = ""

    def supply_delta(self, token):
        return sum(d for (_, t), d in self.balance_deltas.items() if t == token)


class ChainState:
    def __init__(self, tokens=None, pools=None, native_accounts=(), block_number=0):
        self.tokens = dict(tokens or {})
        self.pools = dict(pools or {})
        self.native_accounts = set(native_accounts)
        self.block_number = block_number

    # -- copies ----------------------------------------------------------------

    def snapshot(self):
        return ChainState({k: t.clone() for k, t in self.tokens.items()},
                          {k: p.clone() for k, p in self.pools.items()},
                          self.native_accounts, self.block_number)

    # -- token ledger ------------------------------------------------------------

    def token(self, token_id):
        try:
            return self.tokens[token_id]
        except KeyError:
            raise UnknownTarget(f"unknown token {token_id!r}") from None

    def pool(self, pool_id):
        try:
            return self.pools[pool_id]
        except KeyError:
            raise UnknownTarget(f"unknown pool {pool_id!r}") from None

    def balance(self, token_id, account):
        return self.token(token_id).balance_of(account)

    def transfer(self, token_id, sender, to, amount):
        self.token(token_id).transfer(sender, to, amount)

    def mint(self, token_id, minter, to, amount):
        self.token(token_id).call(minter, "mint", [to, amount])

    def burn(self, token_id, burner, frm, amount):
        self.token(token_id).call(burner, "burn", [frm, amount])

    def accounts(self):
        """Every address that can hold a balance in this state."""
        out = set(self.native_accounts) | set(self.pools)
        for t in self.tokens.values():
            out |= t.known_accounts()
            if t.owner:
                out.add(t.owner)
        return out

    def holders(self, token_id):
        """Accounts with a nonzero balance of ``token_id``."""
        tok = self.token(token_id)
        out = {}
        for a in sorted(self.accounts()):
            b = tok.balance_of(a)
            if b:
                out[a] = b
        return out

    def supply(self, token_id):
        return sum(self.holders(token_id).values())

    def balances(self, accounts=None):
        accounts = sorted(self.accounts() if accounts is None else accounts)
        return {(a, t): tok.balance_of(a)
                for t, tok in sorted(self.tokens.items()) for a in accounts}

    # -- identity --------------------------------------------------------------

    def to_json(self):
        return {
            "block_number": self.block_number,
            "tokens": {k: {"model": t.model, "owner": t.owner, "state": t.state()}
                       for k, t in sorted(self.tokens.items())},
            "pools": {k: {**p.params(), "state": p.state()} for k, p in sorted(self.pools.items())},
        }

    def digest(self):
        """Content hash of the ledger and pool state (block number excluded)."""
        doc = self.to_json()
        doc.pop("block_number")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _dispatch(state, tx):
    if tx.target in state.pools:
        return state.pools[tx.target].call(state, tx.sender, tx.function, list(tx.args))
    if tx.target in state.tokens:
        return state.tokens[tx.target].call(tx.sender, tx.function, list(tx.args))
    raise UnknownTarget(f"unknown target {tx.target!r}")


def apply_tx(state, tx, track=True):
    """Run ``tx`` on ``state`` in place.

    Faults propagate; the caller owns rollback (see :func:`exec_bundle`).
    """
    if track:
        accounts = state.accounts() | {tx.sender}
        accounts |= {a for a in tx.args if isinstance(a, str)}
        before = state.balances(accounts)
    out = _dispatch(state, tx)
    deltas = {}
    if track:
        accounts |= state.accounts()
        after = state.balances(accounts)
        for key, b in after.items():
            d = b - before.get(key, 0)
            if d:
                deltas[key] = d
    return ExecReceipt(True, [] if out is None else [out], deltas)


def exec_bundle(state, txs, track=True):
    """Execute ``txs`` atomically on a snapshot of ``state``.

    Returns ``(new_state, receipts)``; ``state`` itself is never modified.
    """
    if not txs:
        raise ValueError("bundle must contain at least one transaction")
    work = state.snapshot()
    receipts = []
    for i, tx in enumerate(txs):
        try:
            receipts.append(apply_tx(work, tx, track))
        except SimError as exc:
            receipts.append(ExecReceipt(False, error=f"{type(exc).__name__}: {exc}"))
            log.debug("bundle reverted at tx %d: %s", i, exc)
            raise BundleReverted(i, exc, receipts) from exc
    work.block_number = state.block_number + 1
    return work, receipts


def conservation_violations(tx, receipt, state):
    """Tokens whose supply changed although ``tx`` is not a supply operation.

    Builtin tokens may change supply only through their designated supply
    functions. Pool entry points must conserve every token except the
    liquidity tokens they mint or burn.
    """
    # Interpreted contracts are exactly what the scanner classifies, so
    # their supply behaviour is not asserted here.
    exempt = {k for k, t in state.tokens.items() if t.model == "contract"}
    if tx.target in state.tokens:
        if tx.function in state.tokens[tx.target].supply_functions:
            exempt.add(tx.target)
    elif tx.target in state.pools:
        pool = state.pools[tx.target]
        if isinstance(pool, ConcTick):
            exempt.add(pool.token_l)
    bad = {}
    for token in state.tokens:
        if token in exempt:
            continue
        d = receipt.supply_delta(token)
        if d:
            bad[token] = d
    return bad


# -- PITEX ---------------------------------------------------------------------

PROBE = "__pitex_probe__"
DONOR = "__pitex_donor__"


def _exchange_y(state, pool, dy, tick):
    """Exchange ``dy`` of the pool's Y through its Y-in entry point."""
    if isinstance(pool, ConcTick) and tick is not None:
        fn, args = "addL", [tick, dy]
    elif isinstance(pool, LendingFixed):
        fn, args = "repay", [dy]
    elif isinstance(pool, ReserveCPMM):
        fn, args = "swap_yx", [dy]
    else:
        raise RuntimeFault(f"pool {pool.pool_id} has no Y-in exchange")
    receipt = apply_tx(state, Tx(PROBE, pool.pool_id, fn, args), track=False)
    return receipt.outputs[0]


def pitex_test(state, pool_id, token_y, dy, dy2, tick=None):
    """Differential test for price-insensitive exchange.

    Snapshot A exchanges ``dy`` directly. Snapshot B first transfers ``dy2``
    of Y straight to the pool address, bypassing its entry points, and then
    exchanges ``dy``. The venue is insensitive iff both outputs are equal.
    """
    if dy <= 0 or dy2 <= 0:
        raise ValueError("probe amounts must be positive")
    pool = state.pool(pool_id)
    if token_y not in (pool.token_x, pool.token_y):
        raise ValueError(f"pool {pool_id} does not exchange {token_y}")
    if token_y == pool.token_x:
        raise ValueError("pitex_test probes the pool's Y side; pass its token_y")
    outs = []
    for perturb in (False, True):
        snap = state.snapshot()
        tok = snap.token(token_y)
        tok.credit(PROBE, dy)
        if perturb:
            tok.credit(DONOR, dy2)
            snap.transfer(token_y, DONOR, pool_id, dy2)
        outs.append(_exchange_y(snap, snap.pool(pool_id), dy, tick))
    dx1, dx2 = outs
    log.debug("pitex %s: dX1=%d dX2=%d", pool_id, dx1, dx2)
    return "insensitive" if dx1 == dx2 else "sensitive"


def new_lp_token(token_id, pool_id):
    return BuiltinERC20(token_id, owner=pool_id)
