"""Scenario (``.scn``) and bundle (``.txs``) file loading.

A scenario is a JSON document; see docs/formats.md for the full layout.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from ..lang import parse
from .chain import ChainState, Tx, new_lp_token
from .pools import BalanceCPMM, ConcTick, LendingFixed, ReserveCPMM
from .tokens import ONE, BuiltinERC20, BuiltinRebase, InterpretedToken


class FixtureError(ValueError):
    pass


@dataclass
class Scenario:
    state: ChainState
    searcher: Optional[str] = None
    searcher_token: Optional[str] = None
    budget: Optional[int] = None
    source_path: str = ""
    meta: dict = field(default_factory=dict)


def _int(v, what):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise FixtureError(f"{what}: expected integer, got {v!r}")
    try:
        return int(v)
    except ValueError:
        # allow 1e18-style literals
        try:
            f = float(v)
        except ValueError:
            raise FixtureError(f"{what}: expected integer, got {v!r}") from None
        if not f.is_integer():
            raise FixtureError(f"{what}: expected integer, got {v!r}")
        mant, _, exp = str(v).lower().partition("e")
        return int(mant) * 10 ** int(exp) if exp else int(f)


def _balances(spec, what):
    return {a: _int(b, f"{what}[{a}]") for a, b in (spec or {}).items()}


def build_token(token_id, spec, base_dir="."):
    tok = _build_token(token_id, spec, base_dir)
    if spec.get("implements"):
        tok.implements = spec["implements"]
    return tok


def _build_token(token_id, spec, base_dir):
    model = spec.get("model", "erc20")
    owner = spec.get("owner")
    balances = _balances(spec.get("balances"), f"token {token_id} balances")
    if model == "erc20":
        return BuiltinERC20(token_id, balances, owner)
    if model == "rebase":
        return BuiltinRebase(token_id, balances, owner, _int(spec.get("scale", ONE), "scale"))
    if model == "contract":
        if "source" in spec:
            path = os.path.join(base_dir, spec["source"])
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise FixtureError(f"token {token_id}: cannot read {path}: {exc}") from exc
            unit = parse(text, path)
        elif "code" in spec:
            unit = parse(spec["code"], f"<{token_id}>")
        else:
            raise FixtureError(f"token {token_id}: contract model needs 'source' or 'code'")
        name = spec.get("contract")
        contract = unit.contract(name) if name else unit.contracts[0]
        if contract is None:
            raise FixtureError(f"token {token_id}: no contract {name!r}")
        tok = InterpretedToken(token_id, contract, owner)
        for var, value in (spec.get("storage") or {}).items():
            if var not in tok.storage:
                raise FixtureError(f"token {token_id}: unknown state variable {var!r}")
            tok.storage[var] = (_balances(value, var) if isinstance(value, dict)
                                else _int(value, var))
        for a, b in balances.items():
            tok.credit(a, b)
        return tok
    raise FixtureError(f"token {token_id}: unknown model {model!r}")


def build_pool(pool_id, spec, state, default_fee_bps=0):
    kind = spec.get("kind")
    tx, ty = spec.get("token_x"), spec.get("token_y")
    for t in (tx, ty):
        if t not in state.tokens:
            raise FixtureError(f"pool {pool_id}: unknown token {t!r}")
    fee = _int(spec.get("fee_bps", default_fee_bps), "fee_bps")
    rx = _int(spec.get("reserve_x", 0), "reserve_x")
    ry = _int(spec.get("reserve_y", 0), "reserve_y")
    if kind == "reserve_cpmm":
        pool = ReserveCPMM(pool_id, tx, ty, rx, ry, fee)
    elif kind == "balance_cpmm":
        pool = BalanceCPMM(pool_id, tx, ty, fee)
    elif kind == "lending_fixed":
        pool = LendingFixed(pool_id, tx, ty, _int(spec.get("price_num", 1), "price_num"),
                            _int(spec.get("price_den", 1), "price_den"), fee)
    elif kind == "conc_tick":
        tl = spec.get("token_l", f"{pool_id}.L")
        if tl in state.tokens:
            raise FixtureError(f"pool {pool_id}: liquidity token {tl!r} already exists")
        state.tokens[tl] = new_lp_token(tl, pool_id)
        liq = spec.get("active_liquidity")
        pool = ConcTick(pool_id, tx, ty, tl, rx, ry,
                        _int(spec.get("active_tick", 0), "active_tick"),
                        _int(spec.get("tick_price_num", 1), "tick_price_num"),
                        _int(spec.get("tick_price_den", 1), "tick_price_den"),
                        math.isqrt(rx * ry) if liq is None else _int(liq, "active_liquidity"),
                        fee)
    else:
        raise FixtureError(f"pool {pool_id}: unknown kind {kind!r}")
    # Seed the pool's actual holdings: reserves plus any extra liquidity.
    extra_x = _int(spec.get("extra_x", 0), "extra_x")
    extra_y = _int(spec.get("extra_y", 0), "extra_y")
    if rx + extra_x:
        state.tokens[tx].credit(pool_id, rx + extra_x)
    if ry + extra_y:
        state.tokens[ty].credit(pool_id, ry + extra_y)
    return pool


def scenario_from_dict(doc, base_dir=".", source_path="", default_fee_bps=0):
    if not isinstance(doc, dict):
        raise FixtureError("scenario must be a JSON object")
    state = ChainState(native_accounts=doc.get("accounts", []),
                       block_number=_int(doc.get("block_number", 0), "block_number"))
    for tid, spec in sorted((doc.get("tokens") or {}).items()):
        state.tokens[tid] = build_token(tid, spec, base_dir)
    for pid, spec in sorted((doc.get("pools") or {}).items()):
        if pid in state.tokens:
            raise FixtureError(f"pool id {pid!r} collides with a token id")
        state.pools[pid] = build_pool(pid, spec, state, default_fee_bps)
    searcher = doc.get("searcher") or {}
    budget = searcher.get("budget")
    scn = Scenario(state, searcher.get("address"), searcher.get("token"),
                   None if budget is None else _int(budget, "budget"),
                   source_path, {k: v for k, v in doc.items()
                                 if k not in ("accounts", "tokens", "pools", "searcher")})
    if scn.searcher:
        state.native_accounts.add(scn.searcher)
    return scn


def load_scenario(path, default_fee_bps=0):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FixtureError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(doc, os.path.dirname(os.path.abspath(path)), path,
                              default_fee_bps)


def parse_arg(text):
    try:
        return int(text)
    except ValueError:
        return text


def parse_bundle(text):
    """Parse ``sender target function args...`` lines; ``#`` starts a comment."""
    txs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise FixtureError(f"bundle line {lineno}: need sender, target and function")
        txs.append(Tx(parts[0], parts[1], parts[2], tuple(parse_arg(a) for a in parts[3:])))
    return txs


def load_bundle(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_bundle(fh.read())
    except OSError as exc:
        raise FixtureError(f"cannot read bundle {path}: {exc}") from exc
