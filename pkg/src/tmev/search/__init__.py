"""tSEARCH: template instantiation, watch list, solving and tournament selection."""
from .constraints import (DynamicConstraint, PoolInfo, StaticConstraint, build_relations,
                          classify_pools, eval_relations, gen_static_constraints,
                          instantiate_dynamic, statically_feasible)
from .pipeline import SearchConfig, SearchResult, run_search, static_constraints_for
from .solver import (MevPlan, ReplayResult, SolverTimeout, golden_max, make_plan,
                     replay_plan, sim_objective, solve, synthesize, tournament)
from .templates import TEMPLATE_IDS, TEMPLATES, Leg, Template, concrete_action, get_templates
from .watch import (Match, PendingTx, WatchEntry, build_watchlist, parse_record, read_stream,
                    watch_and_match)

__all__ = [
    "DynamicConstraint", "PoolInfo", "StaticConstraint", "build_relations", "classify_pools",
    "eval_relations", "gen_static_constraints", "instantiate_dynamic", "statically_feasible",
    "SearchConfig", "SearchResult", "run_search", "static_constraints_for",
    "MevPlan", "ReplayResult", "SolverTimeout", "golden_max", "make_plan", "replay_plan",
    "sim_objective", "solve", "synthesize", "tournament",
    "TEMPLATE_IDS", "TEMPLATES", "Leg", "Template", "concrete_action", "get_templates",
    "Match", "PendingTx", "WatchEntry", "build_watchlist", "parse_record", "read_stream",
    "watch_and_match",
]
