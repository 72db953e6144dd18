"""Deterministic chain simulator: tokens, pools, bundles and the PITEX test."""
from .chain import (ChainState, ExecReceipt, Tx, apply_tx, conservation_violations,
                    exec_bundle, pitex_test)
from .errors import (ActiveTickError, BundleReverted, EmptyPool, InsufficientBalance,
                     InsufficientPoolLiquidity, InsufficientTrade, RuntimeFault, SimError,
                     StaleState, Unauthorized, UnknownTarget)
from .fixture import (FixtureError, Scenario, load_bundle, load_scenario, parse_bundle,
                      scenario_from_dict)
from .interp import Interpreter, eval_expr, initial_storage
from .pools import (ACTION_FUNCTIONS, BalanceCPMM, ConcTick, LendingFixed, ReserveCPMM,
                    cpmm_out)
from .tokens import ONE, BuiltinERC20, BuiltinRebase, InterpretedToken

__all__ = [
    "ChainState", "ExecReceipt", "Tx", "apply_tx", "conservation_violations",
    "exec_bundle", "pitex_test",
    "ActiveTickError", "BundleReverted", "EmptyPool", "InsufficientBalance",
    "InsufficientPoolLiquidity", "InsufficientTrade", "RuntimeFault", "SimError",
    "StaleState", "Unauthorized", "UnknownTarget",
    "FixtureError", "Scenario", "load_bundle", "load_scenario", "parse_bundle",
    "scenario_from_dict",
    "Interpreter", "eval_expr", "initial_storage",
    "ACTION_FUNCTIONS", "BalanceCPMM", "ConcTick", "LendingFixed", "ReserveCPMM", "cpmm_out",
    "ONE", "BuiltinERC20", "BuiltinRebase", "InterpretedToken",
]
