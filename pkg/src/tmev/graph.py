"""Token system dependency graph (tSDG).

Each function gets an intra-procedural dependence graph built directly
from the structured IR: loops are unrolled ``unroll`` times, reaching
definitions are computed by a recursive walk, and a statement is
control-dependent on the innermost enclosing branch. ``construct_tsdg``
stitches those graphs together with state-variable def-use edges using a
worklist seeded from the return statements of ``balanceOf``.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .lang import ast as A

log = logging.getLogger(__name__)

ENTRY = "entry"
EDGE_KINDS = ("data", "control", "interproc_def_use")


class MissingBalanceOf(Exception):
    pass


@dataclass(frozen=True)
class PDGNode:
    id: str
    function: str
    stmt_ref: str
    kind: str  # entry | return | assign | compound_assign | branch | decl
    defs: FrozenSet[str] = frozenset()
    uses: FrozenSet[str] = frozenset()
    # Names read whose value may come from function entry (i.e. storage).
    entry_uses: FrozenSet[str] = frozenset()
    # Enclosing branch conditions, outermost first: (branch node id, taken).
    guards: Tuple[Tuple[str, bool], ...] = ()
    order: int = 0
    ir: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PDGEdge:
    src: str
    dst: str
    kind: str
    var: Optional[str] = field(default=None, compare=False)


@dataclass
class TSDG:
    nodes: List[PDGNode]
    edges: List[PDGEdge]
    roots: List[str]
    var_index: Dict[str, Dict[str, List[str]]]
    contract: str = ""
    pdg_builds: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self._by_id = {n.id: n for n in self.nodes}
        self._preds = {}
        for e in self.edges:
            self._preds.setdefault(e.dst, []).append(e)

    def node(self, node_id) -> PDGNode:
        return self._by_id[node_id]

    def predecessors(self, node_id, kinds=EDGE_KINDS):
        return [e for e in self._preds.get(node_id, ()) if e.kind in kinds]

    def function_nodes(self, fname):
        return sorted((n for n in self.nodes if n.function == fname),
                      key=lambda n: n.order)

    def export(self) -> str:
        """Line-oriented text form: ``N id func stmt kind`` / ``E src dst kind``."""
        lines = [f"N {n.id} {n.function} {n.stmt_ref} {n.kind}"
                 for n in sorted(self.nodes, key=lambda n: n.id)]
        edges = sorted({(e.src, e.dst, e.kind) for e in self.edges})
        lines += [f"E {s} {d} {k}" for s, d, k in edges]
        return "\n".join(lines) + "\n"


# -- intra-procedural --------------------------------------------------------

def unroll_loops(body, n):
    """Replace every ``while`` by ``n`` nested ``if`` copies of itself."""
    out = []
    for s in body:
        if isinstance(s, A.While):
            inner = unroll_loops(s.body, n)
            nested = ()
            for _ in range(n):
                nested = (A.If(s.cond, tuple(inner) + nested, (), pos=s.pos),)
            out.extend(nested)
        elif isinstance(s, A.If):
            out.append(A.If(s.cond, tuple(unroll_loops(s.then, n)),
                            tuple(unroll_loops(s.orelse, n)), pos=s.pos))
        else:
            out.append(s)
    return out


class _IntraBuilder:
    def __init__(self, fn):
        self.fn = fn
        self.nodes = []
        self.edges = []
        self.reaching = {}  # node id -> {name: frozenset(def ids | None)}

    def new_node(self, ref, kind, defs, uses, guards, ir):
        node_id = f"{self.fn.name}:{ref}"
        node = PDGNode(node_id, self.fn.name, ref, kind, frozenset(defs),
                       frozenset(uses), guards=tuple(guards),
                       order=len(self.nodes), ir=ir)
        self.nodes.append(node)
        return node

    def record_uses(self, node, env):
        self.reaching[node.id] = {u: env.get(u, frozenset([None])) for u in node.uses}

    def walk(self, body, env, guards, prefix):
        for i, s in enumerate(body):
            if env is None:
                break  # unreachable after return on every path
            ref = f"{prefix}{i}"
            if isinstance(s, A.If):
                node = self.new_node(ref, "branch", (), A.expr_names(s.cond), guards, s)
                self.record_uses(node, env)
                then_env = self.walk(s.then, dict(env), guards + [(node.id, True)], f"{ref}/then/")
                else_env = self.walk(s.orelse, dict(env), guards + [(node.id, False)], f"{ref}/else/")
                env = _merge(then_env, else_env)
                continue
            if isinstance(s, A.Return):
                uses = A.expr_names(s.expr) if s.expr is not None else set()
                node = self.new_node(ref, "return", (), uses, guards, s)
                self.record_uses(node, env)
                env = None
                continue
            if isinstance(s, A.LocalDecl):
                node = self.new_node(ref, "decl", {s.name}, A.expr_names(s.expr), guards, s)
                self.record_uses(node, env)
                env[s.name] = frozenset([node.id])
                continue
            target = s.target
            name = A.target_name(target)
            uses = set(A.expr_names(s.expr))
            if isinstance(target, A.Index):
                uses |= A.expr_names(target.key)
            kind = "assign"
            if isinstance(s, A.CompoundAssign):
                uses.add(name)
                kind = "compound_assign"
            node = self.new_node(ref, kind, {name}, uses, guards, s)
            self.record_uses(node, env)
            if isinstance(target, A.Index):
                # Field-insensitive mapping: a keyed write is a weak update.
                env[name] = env.get(name, frozenset([None])) | {node.id}
            else:
                env[name] = frozenset([node.id])
        return env

    def build(self, unroll):
        entry = self.new_node(ENTRY, ENTRY, set(self.fn.param_names), (), [], self.fn)
        env = {p: frozenset([entry.id]) for p in self.fn.param_names}
        self.walk(unroll_loops(self.fn.body, unroll), env, [], "")
        nodes = []
        edges = set()
        for node in self.nodes:
            entry_uses = set()
            for name, defs in self.reaching.get(node.id, {}).items():
                for d in defs:
                    if d is None:
                        entry_uses.add(name)
                    else:
                        edges.add(PDGEdge(d, node.id, "data", name))
            if node.guards:
                edges.add(PDGEdge(node.guards[-1][0], node.id, "control"))
            nodes.append(PDGNode(node.id, node.function, node.stmt_ref, node.kind,
                                 node.defs, node.uses, frozenset(entry_uses),
                                 node.guards, node.order, node.ir))
        return nodes, sorted(edges, key=lambda e: (e.src, e.dst, e.kind))


def _merge(a, b):
    if a is None:
        return b
    if b is None:
        return a
    out = {}
    for name in set(a) | set(b):
        out[name] = a.get(name, frozenset([None])) | b.get(name, frozenset([None]))
    return out


def intra_pdg(fn: A.FunctionIR, unroll: int = 1):
    """Nodes and data/control edges of one function."""
    if unroll < 1:
        raise ValueError("unroll must be >= 1")
    return _IntraBuilder(fn).build(unroll)


# -- inter-procedural --------------------------------------------------------

def backward_origins(nodes_by_id, preds, start, follow_control=True):
    """Backward data-flow from ``start`` inside one function.

    Returns ``(visited, origins)`` where ``origins`` lists ``(var, node_id)``
    for every name read with a value that may come from storage.
    """
    kinds = ("data", "control") if follow_control else ("data",)
    seen = {start}
    stack = [start]
    origins = []
    while stack:
        nid = stack.pop()
        node = nodes_by_id[nid]
        for var in sorted(node.entry_uses):
            origins.append((var, nid))
        for e in preds.get(nid, ()):
            if e.kind in kinds and e.src not in seen:
                seen.add(e.src)
                stack.append(e.src)
    return seen, origins


def construct_tsdg(contract: A.ContractIR, unroll: int = 1,
                   track_control_origins: bool = True) -> TSDG:
    bal = contract.function("balanceOf")
    if bal is None:
        raise MissingBalanceOf(f"contract {contract.name} has no balanceOf")
    state_vars = contract.state_var_names
    pdgs = {}
    builds = {}
    nodes_by_id = {}
    preds = {}

    def pdg(fname):
        if fname not in pdgs:
            fn = contract.function(fname)
            nodes, edges = intra_pdg(fn, unroll)
            builds[fname] = builds.get(fname, 0) + 1
            pdgs[fname] = (nodes, edges)
            for n in nodes:
                nodes_by_id[n.id] = n
            for e in edges:
                preds.setdefault(e.dst, []).append(e)
        return pdgs[fname]

    # Definition sites per state variable, discovered lazily.
    def_sites = {}

    def find_defs(var):
        if var not in def_sites:
            sites = []
            for fn in contract.functions:
                if var in A.defined_state_vars(contract, fn):
                    nodes, _ = pdg(fn.name)
                    sites += [n.id for n in nodes if var in n.defs and n.kind != ENTRY]
            def_sites[var] = sites
        return def_sites[var]

    roots = [n.id for n in pdg("balanceOf")[0] if n.kind == "return"]
    queue = deque(roots)
    enqueued = {(r, None) for r in roots}
    considered = set()
    interproc = set()
    dequeues = 0
    while queue:
        nid = queue.popleft()
        dequeues += 1
        pdg(nodes_by_id[nid].function)
        _, origins = backward_origins(nodes_by_id, preds, nid, track_control_origins)
        for var, use_id in origins:
            if var not in state_vars:
                continue
            for d in find_defs(var):
                if d != use_id:
                    interproc.add(PDGEdge(d, use_id, "interproc_def_use", var))
            if var in considered:
                continue
            considered.add(var)
            for d in find_defs(var):
                if (d, var) not in enqueued:
                    enqueued.add((d, var))
                    queue.append(d)
    log.debug("tsdg %s: %d dequeues, %d functions", contract.name, dequeues, len(pdgs))

    nodes = []
    edges = []
    for fname in sorted(pdgs):
        nodes += pdgs[fname][0]
        edges += pdgs[fname][1]
    edges += sorted(interproc, key=lambda e: (e.src, e.dst))

    var_index = {}
    for n in nodes:
        for v in n.defs & state_vars:
            var_index.setdefault(v, {"defs": [], "uses": []})["defs"].append(n.id)
        for v in n.uses & state_vars:
            var_index.setdefault(v, {"defs": [], "uses": []})["uses"].append(n.id)
    return TSDG(nodes, edges, roots, var_index, contract.name, builds)


def parse_export(text):
    """Inverse of :meth:`TSDG.export` as plain tuples (for tooling/tests)."""
    nodes, edges = {}, []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "N":
            nodes[parts[1]] = (parts[2], parts[3], parts[4])
        elif parts[0] == "E":
            edges.append((parts[1], parts[2], parts[3]))
    return nodes, edges
