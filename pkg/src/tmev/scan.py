"""tSCAN: supply-control path discovery, stitching and dynamic validation."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import graph
from .lang import ast as A
from .lang import parse, parse_expr
from .lang.printer import format_expr
from .sim.chain import ChainState
from .sim.errors import RuntimeFault, SimError
from .sim.tokens import InterpretedToken

log = logging.getLogger(__name__)

CLASSIFICATIONS = ("candidate", "tsc1", "tsc1_and_tsc2", "rejected")
TSC_CLASSES = ("tsc1", "tsc1_and_tsc2")
CHAIN_EDGES = ("data", "interproc_def_use")

DEFAULT_INT_ARGS = (0, 1, 2, 10, 1000)
DEFAULT_BALANCES = (1000, 2500, 6500)
OWNER = "owner"
TOKEN_ID = "T"
MAX_COMBOS = 256
MAX_PATHS_PER_ROOT = 512


class InfeasibleStitch(Exception):
    pass


@dataclass(frozen=True)
class Call:
    function: str
    args: Tuple[str, ...] = ()

    def to_json(self):
        return {"function": self.function, "args": list(self.args)}


@dataclass
class TPath:
    root: str
    source: str
    node_chain: List[str]
    call_sequence: List[Call]
    classification: str = "candidate"
    constraints: List = field(default_factory=list)
    reason: str = ""
    witness: Optional[dict] = None
    g_form: Optional[str] = None
    # Call index (into call_sequence) of each node_chain entry.
    node_calls: List[int] = field(default_factory=list)

    @property
    def functions(self):
        return [c.function for c in self.call_sequence]

    @property
    def trigger(self):
        """Calls a victim must make (everything before the final balanceOf)."""
        return self.functions[:-1]

    def to_json(self):
        return {
            "root": self.root,
            "source": self.source,
            "node_chain": list(self.node_chain),
            "call_sequence": [c.to_json() for c in self.call_sequence],
            "constraints": [format_expr(c) for c in self.constraints],
            "classification": self.classification,
            "reason": self.reason,
            "g_form": self.g_form,
            "witness": self.witness,
        }


@dataclass
class ScanConfig:
    depth: int = 3
    unroll: int = 1
    track_control_origins: bool = True
    int_args: Tuple[int, ...] = DEFAULT_INT_ARGS
    balances: Tuple[int, ...] = DEFAULT_BALANCES
    max_combos: int = MAX_COMBOS

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.unroll < 1:
            raise ValueError("unroll must be >= 1")


@dataclass
class TscReport:
    contract: str
    tpaths: List[TPath]
    verdict: str
    tsc_kind_summary: Dict[str, int]
    source_name: str = ""
    depth: int = 3
    unroll: int = 1

    @property
    def kind(self):
        classes = {p.classification for p in self.tpaths}
        for c in ("tsc1_and_tsc2", "tsc1"):
            if c in classes:
                return c
        return None

    def to_json(self):
        return {
            "contract": self.contract,
            "source": self.source_name,
            "verdict": self.verdict,
            "kind": self.kind,
            "depth": self.depth,
            "unroll": self.unroll,
            "tsc_kind_summary": dict(self.tsc_kind_summary),
            "tpaths": [p.to_json() for p in self.tpaths],
        }


# -- discovery -----------------------------------------------------------------

def is_arg_or_comp(node):
    return node.kind in (graph.ENTRY, "compound_assign")


def discover_tpaths(tsdg, contract, depth=3):
    """Backward tree paths from each ``balanceOf`` return to a data source.

    A path crosses into a new call whenever it follows an inter-procedural
    def-use edge. Only paths spanning at least two calls and at most
    ``depth`` calls are kept.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    out = []
    for root in tsdg.roots:
        found = []
        # stack items: (node id, chain root..node, segment per node, segment functions)
        stack = [(root, [root], [0], [tsdg.node(root).function])]
        while stack and len(found) < MAX_PATHS_PER_ROOT:
            nid, chain, seg_of, segs = stack.pop()
            node = tsdg.node(nid)
            if len(chain) > 1 and is_arg_or_comp(node) and len(segs) >= 2:
                found.append((chain, seg_of, segs))
            preds = sorted(tsdg.predecessors(nid, CHAIN_EDGES),
                           key=lambda e: (e.kind, e.src), reverse=True)
            for e in preds:
                if e.src in chain:
                    continue
                nsegs = segs
                if e.kind == "interproc_def_use":
                    if len(segs) >= depth:
                        continue
                    nsegs = segs + [tsdg.node(e.src).function]
                stack.append((e.src, chain + [e.src], seg_of + [len(nsegs) - 1], nsegs))
        for chain, seg_of, segs in found:
            node_chain = list(reversed(chain))
            functions = list(reversed(segs))
            node_calls = [len(segs) - 1 - k for k in reversed(seg_of)]
            calls = []
            for k, fname in enumerate(functions):
                fn = contract.function(fname)
                calls.append(Call(fname, tuple(f"{p}_c{k}" for p in fn.param_names)))
            out.append(TPath(root, node_chain[0], node_chain, calls, node_calls=node_calls))
    out.sort(key=lambda p: (p.root, len(p.call_sequence), p.source, p.node_chain))
    return out


# -- stitching -----------------------------------------------------------------

def _rename(expr, state_vars, versions, call_index):
    if isinstance(expr, A.Name):
        if expr.id in state_vars:
            return A.Name(f"{expr.id}_{versions.get(expr.id, 0)}")
        return A.Name(f"{expr.id}_c{call_index}")
    if isinstance(expr, A.Index):
        return A.Index(f"{expr.base}_{versions.get(expr.base, 0)}",
                       _rename(expr.key, state_vars, versions, call_index))
    if isinstance(expr, A.Unary):
        return A.Unary(expr.op, _rename(expr.operand, state_vars, versions, call_index))
    if isinstance(expr, A.Binary):
        return A.Binary(expr.op, _rename(expr.left, state_vars, versions, call_index),
                        _rename(expr.right, state_vars, versions, call_index))
    return expr


def negate(expr):
    if isinstance(expr, A.Unary) and expr.op == "!":
        return A.Binary("!=", expr.operand, A.Num(0))
    return A.Unary("!", expr)


def _atom(expr, polarity=True):
    """Canonical (atom text, polarity) used for contradiction checks."""
    if isinstance(expr, A.Unary) and expr.op == "!":
        return _atom(expr.operand, not polarity)
    if isinstance(expr, A.Binary) and isinstance(expr.right, A.Num) and expr.right.value == 0:
        if expr.op == "!=":
            return _atom(expr.left, polarity)
        if expr.op == "==":
            return _atom(expr.left, not polarity)
    return format_expr(expr), polarity


def call_versions(contract, functions):
    """State-variable versions in effect at the start of each call."""
    state_vars = contract.state_var_names
    cur = {v: 0 for v in state_vars}
    out = []
    for fname in functions:
        out.append(dict(cur))
        fn = contract.function(fname)
        for v in A.defined_state_vars(contract, fn):
            cur[v] += 1
    return out


def _chain_calls(tpath, tsdg):
    """Call index of every chain node (segments split at interproc edges)."""
    if len(tpath.node_calls) == len(tpath.node_chain):
        return tpath.node_calls
    idx = []
    k = 0
    for i, nid in enumerate(tpath.node_chain):
        if i > 0:
            src = tpath.node_chain[i - 1]
            kinds = {e.kind for e in tsdg.predecessors(nid) if e.src == src}
            if "interproc_def_use" in kinds and not kinds & {"data"}:
                k += 1
        idx.append(k)
    return idx


def stitch_execution_path(tpath, contract, tsdg=None):
    """Collect renamed branch conditions guarding every node of the chain."""
    if tsdg is None:
        tsdg = graph.construct_tsdg(contract)
    state_vars = contract.state_var_names
    versions = call_versions(contract, tpath.functions)
    constraints = []
    seen = {}
    for nid, k in zip(tpath.node_chain, _chain_calls(tpath, tsdg)):
        node = tsdg.node(nid)
        for branch_id, taken in node.guards:
            cond = tsdg.node(branch_id).ir.cond
            c = _rename(cond if taken else negate(cond), state_vars, versions[k], k)
            text = format_expr(c)
            if any(format_expr(x) == text for x in constraints):
                continue
            atom, pol = _atom(c)
            if seen.get(atom, pol) != pol:
                raise InfeasibleStitch(f"contradictory path constraints on {atom}")
            seen[atom] = pol
            constraints.append(c)
    tpath.constraints = constraints
    return tpath


# -- dynamic validation ------------------------------------------------------------

def default_fixture(contract, balances=DEFAULT_BALANCES):
    """Chain state with the contract deployed as token ``T`` and seeded holders."""
    tok = InterpretedToken(TOKEN_ID, contract, owner=OWNER)
    accounts = [f"acct{i}" for i in range(len(balances))]
    if tok._balance_map is not None:
        for a, b in zip(accounts, balances):
            tok.credit(a, b)
    return ChainState({TOKEN_ID: tok}, {}, accounts + [OWNER])


def _universe_balances(state, token_id, universe=None):
    tok = state.token(token_id)
    accounts = universe if universe is not None else sorted(state.accounts())
    return {a: tok.balance_of(a) for a in accounts}


def _shared_g(y0, y1):
    """Which closed-form shared g (if any) maps every Y0 to Y1."""
    accts = sorted(a for a in set(y0) | set(y1) if y0.get(a, 0) or y1.get(a, 0))
    if len(accts) < 2:
        return None
    diffs = {y1.get(a, 0) - y0.get(a, 0) for a in accts}
    if len(diffs) == 1 and diffs != {0}:
        return "difference"
    if all(y0.get(a, 0) > 0 for a in accts):
        ratios = {Fraction(y1.get(a, 0), y0[a]) for a in accts}
        if len(ratios) == 1 and ratios != {1}:
            return "ratio"
    return None


def _arg_domain(param, accounts, int_args):
    if param.kind == "address":
        return list(accounts)
    if param.kind == "bool":
        return [0, 1]
    return list(int_args)


def _version0_ok(constraints, storage):
    """Check constraints over version-0 state only; others are assumed satisfiable."""
    from .sim.interp import eval_expr
    env = {f"{k}_0": v for k, v in storage.items() if not isinstance(v, dict)}
    for c in constraints:
        try:
            if not eval_expr(c, env):
                return False
        except (KeyError, ValueError, SimError):
            continue
    return True


def _enabler_prefixes(contract, tpath, state, token_id):
    """Zero-argument-free call prefixes that make version-0 constraints hold."""
    tok = state.token(token_id)
    if _version0_ok(tpath.constraints, tok.storage):
        return [()]
    wanted = set()
    for c in tpath.constraints:
        for name in A.expr_names(c):
            base, _, ver = name.rpartition("_")
            if ver == "0" and base in contract.state_var_names:
                wanted.add(base)
    cands = [f.name for f in contract.functions
             if f.name != "balanceOf" and not f.params
             and wanted & A.defined_state_vars(contract, f)]
    prefixes = []
    for n in (1, 2):
        for pre in itertools.product(cands, repeat=n):
            snap = state.snapshot()
            try:
                for fname in pre:
                    _call(snap, contract, token_id, fname, [])
            except SimError:
                continue
            if _version0_ok(tpath.constraints, snap.token(token_id).storage):
                prefixes.append(pre)
        if prefixes:
            break
    return prefixes or [()]


def _sender(contract, fname, fixture_accounts):
    fn = contract.function(fname)
    return OWNER if fn.owner_only else fixture_accounts[-1]


def _fixture_accounts(state):
    return sorted(a for a in state.native_accounts if a != OWNER)


def _call(state, contract, token_id, fname, args, fixture_accounts=None):
    accts = fixture_accounts or _fixture_accounts(state)
    state.token(token_id).call(_sender(contract, fname, accts), fname, list(args))


def validate_tsc(tpath, contract, fixture=None, config=None, token_id=TOKEN_ID):
    """Execute the trigger calls and classify against TSC-1 / TSC-2.

    Returns the classification; witness arguments are stored on the path.
    Raises RuntimeFault when every attempted execution traps.
    """
    config = config or ScanConfig()
    if fixture is None:
        fixture = default_fixture(contract, config.balances)
    fixture_accounts = _fixture_accounts(fixture)
    addresses = fixture_accounts + [OWNER]
    calls = tpath.call_sequence[:-1]
    domains = []
    for call in calls:
        fn = contract.function(call.function)
        domains += [_arg_domain(p, addresses, config.int_args) for p in fn.params]
    prefixes = _enabler_prefixes(contract, tpath, fixture, token_id)
    best, best_witness, best_g = "rejected", None, None
    attempts = traps = 0
    last_fault = None
    for prefix in prefixes:
        base = fixture.snapshot()
        try:
            for fname in prefix:
                _call(base, contract, token_id, fname, [], fixture_accounts)
        except SimError:
            continue
        # trigger arguments only name these addresses, so the holder set is fixed
        universe = sorted(set(base.accounts()) | set(addresses))
        y0 = _universe_balances(base, token_id, universe)
        head_cache = {}  # args of all calls but the last -> state after them
        for combo in itertools.islice(itertools.product(*domains), config.max_combos):
            attempts += 1
            args_by_call = []
            pos = 0
            for call in calls:
                args_by_call.append(list(combo[pos:pos + len(call.args)]))
                pos += len(call.args)
            try:
                head = tuple(tuple(a) for a in args_by_call[:-1])
                if head not in head_cache:
                    st = base.snapshot()
                    try:
                        for call, args in zip(calls[:-1], args_by_call):
                            _call(st, contract, token_id, call.function, args,
                                  fixture_accounts)
                    except SimError as exc:
                        st = exc
                    head_cache = {head: st}
                st = head_cache[head]
                if isinstance(st, SimError):
                    raise st
                snap = st.snapshot()
                _call(snap, contract, token_id, calls[-1].function, args_by_call[-1],
                      fixture_accounts)
                y1 = _universe_balances(snap, token_id, universe)
            except SimError as exc:
                traps += 1
                last_fault = exc
                continue
            touched = {a for a in set(y0) | set(y1) if y0.get(a, 0) or y1.get(a, 0)}
            if sum(y1.get(a, 0) for a in touched) == sum(y0.get(a, 0) for a in touched):
                continue
            g = _shared_g(y0, y1)
            cls = "tsc1_and_tsc2" if g else "tsc1"
            if best != "tsc1_and_tsc2" and (best == "rejected" or cls == "tsc1_and_tsc2"):
                best, best_g = cls, g
                best_witness = {
                    "prefix": list(prefix),
                    "calls": [{"function": c.function, "args": a}
                              for c, a in zip(calls, args_by_call)],
                    "supply_before": sum(y0.get(a, 0) for a in touched),
                    "supply_after": sum(y1.get(a, 0) for a in touched),
                }
            if best == "tsc1_and_tsc2":
                break
        if best == "tsc1_and_tsc2":
            break
    if attempts and traps == attempts:
        raise RuntimeFault(f"every execution of {tpath.trigger} trapped: {last_fault}")
    tpath.witness = best_witness
    tpath.g_form = best_g
    return best


# -- pipeline ----------------------------------------------------------------------

def scan_contract_ir(contract, config=None, source_name=""):
    config = config or ScanConfig()
    tsdg = graph.construct_tsdg(contract, config.unroll, config.track_control_origins)
    tpaths = discover_tpaths(tsdg, contract, config.depth)
    fixture = default_fixture(contract, config.balances)
    cache = {}
    for tp in tpaths:
        try:
            stitch_execution_path(tp, contract, tsdg)
        except InfeasibleStitch as exc:
            tp.classification, tp.reason = "rejected", str(exc)
            continue
        key = (tuple(tp.trigger), tuple(format_expr(c) for c in tp.constraints))
        if key not in cache:
            try:
                cls = validate_tsc(tp, contract, fixture, config)
                cache[key] = (cls, tp.witness, tp.g_form, "" if cls != "rejected"
                              else "no tried argument changes total supply")
            except RuntimeFault as exc:
                cache[key] = ("rejected", None, None, f"runtime fault: {exc}")
        tp.classification, tp.witness, tp.g_form, tp.reason = cache[key]
    summary = {c: 0 for c in CLASSIFICATIONS}
    for tp in tpaths:
        summary[tp.classification] += 1
    verdict = "tsc_token" if summary["tsc1"] + summary["tsc1_and_tsc2"] else "non_tsc_token"
    log.info("scan %s: %d tpaths, verdict %s", contract.name, len(tpaths), verdict)
    return TscReport(contract.name, tpaths, verdict, summary, source_name,
                     config.depth, config.unroll)


def scan_source(source, config=None, source_name="<source>"):
    """Scan every contract in ``source`` that defines ``balanceOf``."""
    unit = parse(source, source_name)
    return [scan_contract_ir(c, config, source_name) for c in unit.contracts
            if c.function("balanceOf") is not None]


def scan_contract(source, config=None, source_name="<source>", contract=None):
    """Scan one contract of ``source``.

    Without ``contract`` the first contract defining ``balanceOf`` is used;
    if none does, the first contract is scanned and ``MissingBalanceOf``
    propagates from graph construction.
    """
    unit = parse(source, source_name)
    if contract is not None:
        target = unit.contract(contract)
        if target is None:
            raise ValueError(f"{source_name}: no contract named {contract!r}")
    else:
        target = next((c for c in unit.contracts if c.function("balanceOf") is not None),
                      unit.contracts[0])
    return scan_contract_ir(target, config, source_name)


def tpath_from_json(doc):
    tp = TPath(doc["root"], doc["source"], list(doc["node_chain"]),
               [Call(c["function"], tuple(c.get("args", ()))) for c in doc["call_sequence"]],
               doc.get("classification", "candidate"),
               [parse_expr(c) for c in doc.get("constraints", [])],
               doc.get("reason", ""), doc.get("witness"), doc.get("g_form"))
    return tp


def report_from_json(doc):
    """Rebuild a :class:`TscReport` from its JSON form."""
    tpaths = [tpath_from_json(t) for t in doc.get("tpaths", [])]
    return TscReport(doc["contract"], tpaths, doc["verdict"],
                     dict(doc.get("tsc_kind_summary", {})), doc.get("source", ""),
                     doc.get("depth", 3), doc.get("unroll", 1))
