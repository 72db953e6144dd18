"""Command line entry point: ``tmev scan|sim|pitex|search|replay|gen-corpus``.

Machine-readable output goes to stdout (or ``--out``/``--report``); a short
human-readable summary goes to stderr. Exit codes: 0 success, 1 analysis
finished with errors (trapping files, reverted bundles, replay mismatch),
2 usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import ConfigError, config_from_dict, load_config
from .gen import LABELS, generate_corpus
from .lang import LangError
from .scan import ScanConfig, report_from_json, scan_source
from .search import MevPlan, SearchConfig, TEMPLATE_IDS, read_stream, replay_plan, run_search
from .sim import (BundleReverted, FixtureError, SimError, StaleState, exec_bundle,
                  load_bundle, load_scenario, pitex_test)
from .sim.chain import conservation_violations

log = logging.getLogger("tmev")

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad input files or flag values; maps to exit code 2."""


def _dump(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _say(msg):
    print(msg, file=sys.stderr)


def _config(args):
    try:
        cfg = load_config(getattr(args, "config", None))
        overrides = {}
        for key in ("depth", "unroll", "fee_bps", "budget", "seed", "window"):
            v = getattr(args, key, None)
            if v is not None:
                overrides[key] = v
        if getattr(args, "value_residual_y", False):
            overrides["value_residual_y"] = True
        return config_from_dict(overrides, cfg) if overrides else cfg
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _scenario(path, cfg):
    try:
        return load_scenario(path, cfg.fee_bps)
    except FixtureError as exc:
        raise UsageError(str(exc)) from exc


# -- scan ----------------------------------------------------------------------

def _expand(paths):
    out = []
    for p in paths:
        if os.path.isdir(p):
            out += sorted(os.path.join(p, f) for f in os.listdir(p) if f.endswith(".tok"))
        elif os.path.isfile(p):
            out.append(p)
        else:
            raise UsageError(f"no such file: {p}")
    return out


def _scan_one(job):
    path, depth, unroll = job
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
        reports = scan_source(source, ScanConfig(depth=depth, unroll=unroll), path)
        return path, [r.to_json() for r in reports], None
    except (OSError, LangError, SimError, ValueError) as exc:
        return path, [], f"{type(exc).__name__}: {exc}"


def cmd_scan(args):
    cfg = _config(args)
    files = _expand(args.paths)
    jobs = [(f, cfg.depth, cfg.unroll) for f in files]
    if args.jobs and args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_scan_one, jobs))  # map keeps input order
    else:
        results = [_scan_one(j) for j in jobs]
    reports, errors = [], 0
    for path, docs, err in results:
        if err:
            errors += 1
            _say(f"{path}: error: {err}")
            continue
        if not docs:
            _say(f"{path}: no contract defines balanceOf; nothing to scan")
        for d in docs:
            reports.append(d)
            kind = f" ({d['kind']})" if d["kind"] else ""
            _say(f"{path}: {d['contract']}: {d['verdict']}{kind}")
    _write(args.report, _dump({"reports": reports}))
    _say(f"scanned {len(files)} file(s), {len(reports)} report(s), {errors} error(s)")
    return EXIT_FINDINGS if errors else EXIT_OK


# -- sim / pitex ---------------------------------------------------------------

def _receipt_json(r):
    deltas = [{"account": a, "token": t, "delta": d}
              for (a, t), d in sorted(r.balance_deltas.items()) if d]
    return {"ok": r.ok, "outputs": list(r.outputs), "balance_deltas": deltas,
            "error": r.error}


def cmd_sim(args):
    cfg = _config(args)
    scenario = _scenario(args.fixture, cfg)
    try:
        txs = load_bundle(args.bundle)
    except FixtureError as exc:
        raise UsageError(str(exc)) from exc
    if not txs:
        raise UsageError(f"{args.bundle}: bundle is empty")
    state = scenario.state
    try:
        post, receipts = exec_bundle(state, txs)
    except BundleReverted as exc:
        _write(None, _dump({"ok": False, "reverted_at": exc.index, "error": str(exc),
                            "receipts": [_receipt_json(r) for r in exc.receipts]}))
        _say(f"bundle reverted at tx {exc.index}: {exc.cause}")
        return EXIT_FINDINGS
    violations = []
    for i, (tx, r) in enumerate(zip(txs, receipts)):
        for token, d in sorted(conservation_violations(tx, r, state).items()):
            violations.append({"tx": i, "token": token, "supply_delta": d})
    _write(None, _dump({"ok": True, "receipts": [_receipt_json(r) for r in receipts],
                        "conservation_violations": violations,
                        "state": post.to_json(), "digest": post.digest()}))
    _say(f"executed {len(txs)} tx(s); post-state digest {post.digest()}")
    for v in violations:
        _say(f"tx {v['tx']}: supply of {v['token']} changed by {v['supply_delta']}")
    return EXIT_FINDINGS if violations else EXIT_OK


def cmd_pitex(args):
    cfg = _config(args)
    state = _scenario(args.fixture, cfg).state
    if args.pool not in state.pools:
        raise UsageError(f"fixture has no pool {args.pool!r}")
    pool = state.pools[args.pool]
    token = args.token or pool.token_y
    live = state.balance(token, args.pool) if token in state.tokens else 0
    dy = args.dy or max(1000, live // 100)
    dy2 = args.dy2 or dy
    try:
        verdict = pitex_test(state, args.pool, token, dy, dy2, args.tick)
    except (SimError, ValueError) as exc:
        _say(f"pitex {args.pool}: error: {exc}")
        return EXIT_FINDINGS
    _write(None, _dump({"pool": args.pool, "kind": pool.kind, "token": token, "dy": dy,
                        "dy2": dy2, "tick": args.tick, "classification": verdict}))
    _say(f"{args.pool} ({pool.kind}): {verdict}")
    return EXIT_OK


# -- search / replay -----------------------------------------------------------

def load_watch(path):
    """Reports from a single report, ``{"reports": [...]}`` or a bare list."""
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and "reports" in doc:
        doc = doc["reports"]
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise UsageError(f"{path}: expected a report, a list or {{\"reports\": [...]}}")
    try:
        return [report_from_json(d) for d in doc]
    except (KeyError, TypeError, LangError) as exc:
        raise UsageError(f"{path}: malformed report: {exc}") from exc


def cmd_search(args):
    cfg = _config(args)
    scenario = _scenario(args.fixture, cfg)
    reports = load_watch(args.watch)
    if args.mempool == "-":
        stream = read_stream(sys.stdin)
    else:
        stream = read_stream(_read_text(args.mempool).splitlines())
    templates = None
    if args.templates:
        templates = [t.strip() for t in args.templates.split(",") if t.strip()]
        unknown = sorted(set(templates) - set(TEMPLATE_IDS))
        if unknown:
            raise UsageError(f"unknown template(s): {', '.join(unknown)}")
    sconf = SearchConfig(cfg.budget, cfg.value_residual_y, cfg.window, templates,
                         cfg.max_evals)
    try:
        result = run_search(scenario, reports, stream, sconf)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = "".join(json.dumps(p.to_json(), sort_keys=True) + "\n" for p in result.plans)
    _write(args.out, lines)
    _say(f"{len(stream)} pending tx(s), {result.candidates} static constraint(s), "
         f"{result.matches} match(es), {len(result.plans)} plan(s)")
    for p in result.plans:
        _say(f"  {p.victim_tx_id}: {p.template_id} dX={p.solved_args.get('dX')} "
             f"profit={p.profit}")
    return EXIT_OK


def load_plans(path):
    plans = []
    for lineno, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            plans.append(MevPlan.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"{path}:{lineno}: malformed plan: {exc}") from exc
    return plans


def cmd_replay(args):
    cfg = _config(args)
    state = _scenario(args.fixture, cfg).state
    plans = load_plans(args.plans)
    out, failed = [], 0
    for p in plans:
        row = {"victim_tx_id": p.victim_tx_id, "template_id": p.template_id,
               "recorded_profit": p.profit}
        try:
            r = replay_plan(state, p)
            row.update(ok=r.ok, status="verified" if r.ok else "mismatch",
                       profit=r.profit, error=r.error)
        except StaleState as exc:
            row.update(ok=False, status="stale_state", profit=None, error=str(exc))
        except BundleReverted as exc:
            row.update(ok=False, status="reverted", profit=None, error=str(exc))
        failed += not row["ok"]
        out.append(row)
        _say(f"{p.victim_tx_id} {p.template_id}: {row['status']}"
             + (f" ({row['error']})" if row["error"] else ""))
    _write(None, _dump({"plans": out, "verified": len(out) - failed, "failed": failed}))
    _say(f"{len(out) - failed}/{len(out)} plan(s) verified")
    return EXIT_FINDINGS if failed else EXIT_OK


# -- corpus generation ---------------------------------------------------------

def cmd_gen_corpus(args):
    cfg = _config(args)
    try:
        os.makedirs(args.out, exist_ok=True)
        labels = {}
        for name, kind, source in generate_corpus(args.count, cfg.seed):
            with open(os.path.join(args.out, name), "w", encoding="utf-8") as fh:
                fh.write(source)
            labels[name] = {"verdict": LABELS[kind], "generator_kind": kind}
        with open(os.path.join(args.out, "labels.json"), "w", encoding="utf-8") as fh:
            fh.write(_dump(labels))
    except OSError as exc:
        raise UsageError(f"cannot write corpus to {args.out}: {exc}") from exc
    _say(f"wrote {args.count} contract(s) to {args.out} (seed {cfg.seed})")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _nonneg(text):
    v = int(float(text)) if "e" in text.lower() else int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive(text):
    v = _nonneg(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="tmev", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tmev {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0,
                    help="more logging on stderr (repeatable)")
    ap.add_argument("--config", help="JSON config file (default: $TMEV_CONFIG)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="classify token contracts (TSC-1/TSC-2)")
    p.add_argument("paths", nargs="+", help=".tok files or directories")
    p.add_argument("--depth", type=_positive)
    p.add_argument("--unroll", type=_positive)
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("sim", help="execute a bundle against a scenario")
    p.add_argument("--fixture", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--fee-bps", dest="fee_bps", type=_nonneg)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("pitex", help="price-insensitivity test for one pool")
    p.add_argument("--fixture", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--token", help="token to probe with (default: the pool's Y)")
    p.add_argument("--dy", type=_positive)
    p.add_argument("--dy2", type=_positive)
    p.add_argument("--tick", type=int, choices=(0, 1))
    p.add_argument("--fee-bps", dest="fee_bps", type=_nonneg)
    p.set_defaults(func=cmd_pitex)

    p = sub.add_parser("search", help="match a mempool against scan reports")
    p.add_argument("--fixture", required=True)
    p.add_argument("--watch", required=True, help="scan report JSON")
    p.add_argument("--mempool", required=True, help="JSONL pending txs, or - for stdin")
    p.add_argument("--budget", type=_nonneg)
    p.add_argument("--out", help="plans JSONL (default: stdout)")
    p.add_argument("--value-residual-y", dest="value_residual_y", action="store_true")
    p.add_argument("--window", type=_positive)
    p.add_argument("--templates", help="comma-separated template ids")
    p.add_argument("--fee-bps", dest="fee_bps", type=_nonneg)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("replay", help="re-execute plans and check recorded profit")
    p.add_argument("--fixture", required=True)
    p.add_argument("--plans", required=True)
    p.add_argument("--fee-bps", dest="fee_bps", type=_nonneg)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("gen-corpus", help="write a labelled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=_nonneg, default=1000)
    p.add_argument("--seed", type=_nonneg)
    p.set_defaults(func=cmd_gen_corpus)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        _say(f"tmev {args.command}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
