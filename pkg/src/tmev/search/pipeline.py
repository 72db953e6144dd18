"""Online search: watch list generation, matching, solving and selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..lang import ast as A
from .constraints import classify_pools, gen_static_constraints, instantiate_dynamic
from .solver import DEFAULT_MAX_EVALS, SolverTimeout, solve, tournament
from .templates import TEMPLATES, get_templates
from .watch import DEFAULT_WINDOW, build_watchlist, watch_and_match

log = logging.getLogger(__name__)


@dataclass
class SearchConfig:
    budget: Optional[int] = None
    value_residual_y: bool = False
    window: int = DEFAULT_WINDOW
    templates: Optional[List[str]] = None
    max_evals: int = DEFAULT_MAX_EVALS


@dataclass
class SearchResult:
    plans: list
    matches: int = 0
    candidates: int = 0
    timeouts: int = 0
    considered: Dict[str, list] = field(default_factory=dict)  # victim id -> all plans


def _contract_of(token):
    c = getattr(token, "contract", None)
    return c if isinstance(c, A.ContractIR) else None


def static_constraints_for(scenario, reports, templates=None):
    """Static constraints for every token the searcher could trade against X."""
    state = scenario.state
    x = scenario.searcher_token
    templates = get_templates(templates)
    by_name = {}
    for r in reports:
        if r.verdict == "tsc_token":
            by_name.setdefault(r.contract, r)
    out = []
    for tid, tok in sorted(state.tokens.items()):
        if tid == x or not any(p.token_x == x and p.token_y == tid for p in state.pools.values()):
            continue
        report = by_name.get(tok.implements)
        pools = classify_pools(state, tid, x)
        out += gen_static_constraints(report, pools, templates, tid, x, _contract_of(tok))
    return out


def searcher_budget(scenario, config):
    have = scenario.state.balance(scenario.searcher_token, scenario.searcher)
    budget = config.budget if config.budget is not None else scenario.budget
    return have if budget is None else min(budget, have)


def run_search(scenario, reports, stream, config=None):
    """Emit at most one (tournament-winning) plan per matched pending tx."""
    config = config or SearchConfig()
    if not scenario.searcher or not scenario.searcher_token:
        raise ValueError("scenario must name the searcher and its token")
    budget = searcher_budget(scenario, config)
    statics = static_constraints_for(scenario, reports, config.templates)
    watchlist = build_watchlist(statics)
    matches = watch_and_match(stream, watchlist, config.window)
    result = SearchResult([], len(matches), len(statics))
    per_victim = {}
    order = []
    for m in matches:
        if m.victim.id not in per_victim:
            per_victim[m.victim.id] = []
            order.append(m.victim.id)
        if budget <= 0:
            continue
        for sc in m.entry.constraints:
            template = TEMPLATES[sc.template_id]
            dc = instantiate_dynamic(sc, m.victim.tx, scenario.state, scenario.searcher,
                                     template, m.victim.id, [p.tx for p in m.prefix])
            if not dc.feasible:
                log.debug("%s on %s: %s", sc.describe(), m.victim.id, dc.reason)
                continue
            try:
                plan = solve(dc, budget, config.max_evals, config.value_residual_y)
            except SolverTimeout as exc:
                result.timeouts += 1
                log.warning("%s on %s: %s", sc.describe(), m.victim.id, exc)
                continue
            if plan is not None:
                per_victim[m.victim.id].append(plan)
    for vid in order:
        result.considered[vid] = per_victim[vid]
        best = tournament(per_victim[vid])
        if best is not None:
            result.plans.append(best)
    return result
