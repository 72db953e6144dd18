"""MEV templates and baselines as ordered leg specifications."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

SEARCHER, VICTIM = "searcher", "victim"
POOL_P, POOL_Q, TOKEN = "pool_p", "pool_q", "token"


@dataclass(frozen=True)
class Leg:
    actor: str
    venue: str
    action: str  # swap_xy | swap_yx | tsc_call

    def __str__(self):
        return f"{self.actor}:{self.action}@{self.venue}"


@dataclass(frozen=True)
class Template:
    id: str
    legs: Tuple[Leg, ...]
    # (tx_-1, tx_3) wrapping the core legs; the searcher starts from the numeraire.
    extension_legs: Tuple[Leg, ...] = ()
    sign: int = 1  # TSC direction the template exploits; 0 = no TSC (B0)

    @property
    def all_legs(self):
        if not self.extension_legs:
            return self.legs
        pre, post = self.extension_legs
        return (pre,) + self.legs + (post,)

    @property
    def slots(self):
        return tuple(sorted({leg.venue for leg in self.all_legs if leg.venue != TOKEN}))

    @property
    def needs_tsc(self):
        return any(leg.action == "tsc_call" for leg in self.legs)

    @property
    def victim_index(self):
        return next(i for i, leg in enumerate(self.all_legs) if leg.actor == VICTIM)


def _s(action, venue):
    return Leg(SEARCHER, venue, action)


_TSC = Leg(VICTIM, TOKEN, "tsc_call")
_EXT = (_s("swap_xy", POOL_P), _s("swap_yx", POOL_P))

TEMPLATES = {
    t.id: t for t in (
        Template("B0", (_s("swap_xy", POOL_P), Leg(VICTIM, POOL_P, "swap_xy"),
                        _s("swap_yx", POOL_P)), sign=0),
        Template("B1", (_s("swap_xy", POOL_P), _TSC, _s("swap_yx", POOL_P))),
        Template("D1_plus", (_s("swap_xy", POOL_Q), _TSC, _s("swap_yx", POOL_Q))),
        Template("D2_plus", (_s("swap_xy", POOL_P), _TSC, _s("swap_yx", POOL_Q))),
        Template("D1_minus", (_s("swap_yx", POOL_Q), _TSC, _s("swap_xy", POOL_Q)),
                 _EXT, sign=-1),
        Template("D2_minus", (_s("swap_yx", POOL_P), _TSC, _s("swap_xy", POOL_Q)),
                 _EXT, sign=-1),
        Template("B2_plus", (_TSC, _s("swap_xy", POOL_P), _s("swap_yx", POOL_Q))),
        Template("B2_minus", (_TSC, _s("swap_xy", POOL_Q), _s("swap_yx", POOL_P)), sign=-1),
    )
}
TEMPLATE_IDS = tuple(TEMPLATES)

# Leg action names as recorded on a concrete venue kind.
_LENDING_ACTIONS = {"swap_xy": "lend_borrow", "swap_yx": "lend_repay"}


def concrete_action(action, pool_kind):
    if pool_kind == "lending_fixed":
        return _LENDING_ACTIONS.get(action, action)
    return action


def get_templates(ids=None):
    if ids is None:
        return [TEMPLATES[i] for i in TEMPLATE_IDS]
    unknown = [i for i in ids if i not in TEMPLATES]
    if unknown:
        raise KeyError(f"unknown template ids: {unknown}")
    return [TEMPLATES[i] for i in ids]
