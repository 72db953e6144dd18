"""Watch list and mempool matching."""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import List, Tuple

from ..sim.chain import Tx

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 16


@dataclass
class WatchEntry:
    key: Tuple[str, str, Tuple[str, ...]]  # (target, function, call-sequence prefix)
    constraints: List = field(default_factory=list)

    @property
    def target(self):
        return self.key[0]

    @property
    def function(self):
        return self.key[1]

    @property
    def prefix(self):
        return self.key[2]


@dataclass
class PendingTx:
    id: str
    tx: Tx
    index: int


@dataclass
class Match:
    victim: PendingTx
    entry: WatchEntry
    prefix: List[PendingTx]


def build_watchlist(constraints):
    entries = {}
    for sc in constraints:
        key = sc.watch_key
        entries.setdefault(key, WatchEntry(key)).constraints.append(sc)
    return [entries[k] for k in sorted(entries)]


def parse_record(obj, index):
    """Validate one pending-tx record; returns ``PendingTx`` or raises ValueError."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for k in ("sender", "target", "function"):
        if not isinstance(obj.get(k), str) or not obj[k]:
            raise ValueError(f"record field {k!r} missing or not a string")
    args = obj.get("args", [])
    if not isinstance(args, list) or not all(
            isinstance(a, str) or (isinstance(a, int) and not isinstance(a, bool)) for a in args):
        raise ValueError("record args must be a list of integers and strings")
    rid = obj.get("id", f"tx{index}")
    return PendingTx(str(rid), Tx(obj["sender"], obj["target"], obj["function"], tuple(args)),
                     index)


def read_stream(lines):
    """Parse JSONL pending transactions, skipping malformed lines with a warning."""
    out = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(parse_record(json.loads(line), len(out)))
        except (ValueError, json.JSONDecodeError) as exc:
            log.warning("mempool line %d skipped: %s", lineno, exc)
    return out


def _find_prefix(recent, target, prefix):
    """Latest in-order occurrence of the ``prefix`` calls on ``target`` in ``recent``."""
    found = []
    want = list(prefix)
    for p in reversed(recent):
        if not want:
            break
        if p.tx.target == target and p.tx.function == want[-1]:
            found.append(p)
            want.pop()
    return None if want else list(reversed(found))


def watch_and_match(stream, watchlist, window=DEFAULT_WINDOW):
    """Match pending transactions against watch keys in stream order."""
    by_call = {}
    for entry in watchlist:
        by_call.setdefault((entry.target, entry.function), []).append(entry)
    recent = deque(maxlen=window)
    matches = []
    for item in stream:
        if not isinstance(item, PendingTx):
            try:
                item = parse_record(item, len(recent))
            except ValueError as exc:
                log.warning("pending record skipped: %s", exc)
                continue
        for entry in by_call.get((item.tx.target, item.tx.function), ()):
            pre = _find_prefix(recent, entry.target, entry.prefix)
            if pre is not None:
                matches.append(Match(item, entry, pre))
        recent.append(item)
    return matches
