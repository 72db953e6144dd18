"""Exchange venues.

Every pool is also an account: its address is its pool id, and the
tokens it holds live in the token ledgers like anyone else's. Pools move
tokens through the owning ``ChainState`` so that interpreted tokens run
their own ``transfer`` logic.
"""
from __future__ import annotations

from .errors import (ActiveTickError, EmptyPool, InsufficientPoolLiquidity,
                     InsufficientTrade, RuntimeFault)

BPS = 10_000
POOL_KINDS = ("reserve_cpmm", "balance_cpmm", "lending_fixed", "conc_tick")


def cpmm_out(r_in, r_out, amount_in, fee_bps=0):
    """Constant-product output for ``amount_in`` against reserves ``(r_in, r_out)``."""
    eff = amount_in * (BPS - fee_bps) // BPS
    return r_out * eff // (r_in + eff), eff


def _positive(amount, what="amount"):
    if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
        raise InsufficientTrade(f"{what} must be a positive integer, got {amount!r}")


class Pool:
    kind = "abstract"

    def __init__(self, pool_id, token_x, token_y, fee_bps=0):
        self.pool_id = pool_id
        self.token_x = token_x
        self.token_y = token_y
        self.fee_bps = fee_bps

    def functions(self):
        raise NotImplementedError

    def call(self, chain, sender, function, args):
        handler = self.functions().get(function)
        if handler is None:
            raise RuntimeFault(f"pool {self.pool_id} ({self.kind}) has no function {function!r}")
        return handler(chain, sender, *args)

    def clone(self):
        raise NotImplementedError

    def state(self):
        raise NotImplementedError

    def params(self):
        return {"kind": self.kind, "token_x": self.token_x, "token_y": self.token_y,
                "fee_bps": self.fee_bps}

    def _pay_in(self, chain, sender, token, amount):
        chain.transfer(token, sender, self.pool_id, amount)

    def _pay_out(self, chain, to, token, amount):
        chain.transfer(token, self.pool_id, to, amount)


class ReserveCPMM(Pool):
    """CPMM that prices from internal reserves (updated only by its own swaps)."""
    kind = "reserve_cpmm"

    def __init__(self, pool_id, token_x, token_y, reserve_x=0, reserve_y=0, fee_bps=0):
        super().__init__(pool_id, token_x, token_y, fee_bps)
        self.reserve_x = reserve_x
        self.reserve_y = reserve_y

    def functions(self):
        return {"swap_xy": self.swap_xy, "swap_yx": self.swap_yx}

    def reserves(self, chain):
        return self.reserve_x, self.reserve_y

    def _swap(self, chain, sender, amount, x_in):
        _positive(amount)
        r_x, r_y = self.reserves(chain)
        if r_x == 0 or r_y == 0:
            raise EmptyPool(f"pool {self.pool_id} has an empty reserve")
        t_in, t_out = (self.token_x, self.token_y) if x_in else (self.token_y, self.token_x)
        r_in, r_out = (r_x, r_y) if x_in else (r_y, r_x)
        out, eff = cpmm_out(r_in, r_out, amount, self.fee_bps)
        self._pay_in(chain, sender, t_in, amount)
        self._pay_out(chain, sender, t_out, out)
        self._after_swap(x_in, eff, out)
        return out

    def _after_swap(self, x_in, eff, out):
        if x_in:
            self.reserve_x += eff
            self.reserve_y -= out
        else:
            self.reserve_y += eff
            self.reserve_x -= out

    def swap_xy(self, chain, sender, dx):
        return self._swap(chain, sender, dx, True)

    def swap_yx(self, chain, sender, dy):
        return self._swap(chain, sender, dy, False)

    def clone(self):
        return ReserveCPMM(self.pool_id, self.token_x, self.token_y,
                           self.reserve_x, self.reserve_y, self.fee_bps)

    def state(self):
        return {"reserve_x": self.reserve_x, "reserve_y": self.reserve_y}


class BalanceCPMM(ReserveCPMM):
    """CPMM that prices from its live token balances at call time."""
    kind = "balance_cpmm"

    def __init__(self, pool_id, token_x, token_y, fee_bps=0):
        super().__init__(pool_id, token_x, token_y, 0, 0, fee_bps)

    def reserves(self, chain):
        return (chain.balance(self.token_x, self.pool_id),
                chain.balance(self.token_y, self.pool_id))

    def _after_swap(self, x_in, eff, out):
        pass

    def clone(self):
        return BalanceCPMM(self.pool_id, self.token_x, self.token_y, self.fee_bps)

    def state(self):
        return {}


class LendingFixed(Pool):
    """Fixed-price venue: ``borrow`` takes X collateral and pays Y at num/den."""
    kind = "lending_fixed"

    def __init__(self, pool_id, token_x, token_y, price_num=1, price_den=1, fee_bps=0):
        super().__init__(pool_id, token_x, token_y, fee_bps)
        if price_num <= 0 or price_den <= 0:
            raise ValueError("lending price must be positive")
        self.price_num = price_num
        self.price_den = price_den

    def functions(self):
        return {"borrow": self.borrow, "repay": self.repay}

    def _exchange(self, chain, sender, amount, t_in, t_out, num, den):
        _positive(amount)
        out = amount * num // den
        have = chain.balance(t_out, self.pool_id)
        if out > have:
            raise InsufficientPoolLiquidity(
                f"pool {self.pool_id} holds {have} {t_out}, needs {out}")
        self._pay_in(chain, sender, t_in, amount)
        self._pay_out(chain, sender, t_out, out)
        return out

    def borrow(self, chain, sender, amount):
        return self._exchange(chain, sender, amount, self.token_x, self.token_y,
                              self.price_num, self.price_den)

    def repay(self, chain, sender, amount):
        return self._exchange(chain, sender, amount, self.token_y, self.token_x,
                              self.price_den, self.price_num)

    def clone(self):
        return LendingFixed(self.pool_id, self.token_x, self.token_y,
                            self.price_num, self.price_den, self.fee_bps)

    def state(self):
        return {}

    def params(self):
        return {**super().params(), "price_num": self.price_num, "price_den": self.price_den}


class ConcTick(ReserveCPMM):
    """Two-tick concentrated-liquidity pool.

    The active tick is a reserve-priced CPMM segment. The other tick is out
    of range, so adding liquidity there takes Y only and mints the liquidity
    token L at the tick's fixed price. Adding at the active tick mints L
    against the pool's live Y balance.
    """
    kind = "conc_tick"

    def __init__(self, pool_id, token_x, token_y, token_l, reserve_x=0, reserve_y=0,
                 active_tick=0, tick_price_num=1, tick_price_den=1,
                 active_liquidity=0, fee_bps=0):
        super().__init__(pool_id, token_x, token_y, reserve_x, reserve_y, fee_bps)
        if active_tick not in (0, 1):
            raise ValueError("conc_tick models exactly two ticks, 0 and 1")
        if tick_price_num <= 0 or tick_price_den <= 0:
            raise ValueError("tick price must be positive")
        self.token_l = token_l
        self.active_tick = active_tick
        self.tick_price_num = tick_price_num
        self.tick_price_den = tick_price_den
        self.active_liquidity = active_liquidity

    @property
    def inactive_tick(self):
        return 1 - self.active_tick

    def functions(self):
        return {"swap_xy": self.swap_xy, "swap_yx": self.swap_yx,
                "addL": self.add_liquidity, "removeL": self.remove_liquidity}

    def _check_tick(self, tick):
        if tick not in (0, 1):
            raise RuntimeFault(f"pool {self.pool_id} has no tick {tick!r}")

    def add_liquidity(self, chain, sender, tick, dy):
        self._check_tick(tick)
        if tick == self.active_tick:
            return self.add_liquidity_active(chain, sender, dy)
        return self.add_liquidity_inactive(chain, sender, tick, dy)

    def remove_liquidity(self, chain, sender, tick, dl):
        self._check_tick(tick)
        if tick == self.active_tick:
            raise ActiveTickError(f"tick {tick} of {self.pool_id} is active")
        return self.remove_liquidity_inactive(chain, sender, tick, dl)

    def add_liquidity_inactive(self, chain, sender, tick, dy):
        if tick == self.active_tick:
            raise ActiveTickError(f"tick {tick} of {self.pool_id} is active")
        _positive(dy, "dY")
        dl = dy * self.tick_price_num // self.tick_price_den
        self._pay_in(chain, sender, self.token_y, dy)
        chain.mint(self.token_l, self.pool_id, sender, dl)
        return dl

    def remove_liquidity_inactive(self, chain, sender, tick, dl):
        if tick == self.active_tick:
            raise ActiveTickError(f"tick {tick} of {self.pool_id} is active")
        _positive(dl, "dL")
        dy = dl * self.tick_price_den // self.tick_price_num
        chain.burn(self.token_l, self.pool_id, sender, dl)
        self._pay_out(chain, sender, self.token_y, dy)
        return dy

    def add_liquidity_active(self, chain, sender, dy):
        _positive(dy, "dY")
        live_y = chain.balance(self.token_y, self.pool_id)
        if live_y == 0 or self.active_liquidity == 0:
            raise EmptyPool(f"active tick of {self.pool_id} has no liquidity")
        dl = dy * self.active_liquidity // live_y
        self._pay_in(chain, sender, self.token_y, dy)
        self.reserve_y += dy
        self.active_liquidity += dl
        chain.mint(self.token_l, self.pool_id, sender, dl)
        return dl

    def clone(self):
        return ConcTick(self.pool_id, self.token_x, self.token_y, self.token_l,
                        self.reserve_x, self.reserve_y, self.active_tick,
                        self.tick_price_num, self.tick_price_den,
                        self.active_liquidity, self.fee_bps)

    def state(self):
        return {"reserve_x": self.reserve_x, "reserve_y": self.reserve_y,
                "active_liquidity": self.active_liquidity}

    def params(self):
        return {**super().params(), "token_l": self.token_l, "active_tick": self.active_tick,
                "tick_price_num": self.tick_price_num, "tick_price_den": self.tick_price_den}


# Abstract exchange actions -> concrete entry point per pool kind.
ACTION_FUNCTIONS = {
    "reserve_cpmm": {"swap_xy": "swap_xy", "swap_yx": "swap_yx"},
    "balance_cpmm": {"swap_xy": "swap_xy", "swap_yx": "swap_yx"},
    "conc_tick": {"swap_xy": "swap_xy", "swap_yx": "swap_yx"},
    "lending_fixed": {"swap_xy": "borrow", "swap_yx": "repay"},
}
