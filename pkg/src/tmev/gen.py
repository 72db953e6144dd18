"""Seeded generator of corpus-sized TokenLang contracts with known labels."""
from __future__ import annotations

import random

KINDS = ("plain", "rebase", "mint", "burn", "airdrop", "pause", "chain2", "fee")

LABELS = {
    "plain": "non_tsc_token",
    "pause": "non_tsc_token",
    "rebase": "tsc_token",
    "mint": "tsc_token",
    "burn": "tsc_token",
    "airdrop": "tsc_token",
    "chain2": "tsc_token",
    "fee": "tsc_token",
}

_TRANSFER = """
    transfer(address to, uint amount) {{
        {bal}[msg.sender] -= amount;
        {bal}[to] += amount;
    }}
"""


def _ident(rng, stem):
    return f"{stem}{rng.randrange(100, 1000)}"


def generate_contract(rng, index, kind=None):
    """Return ``(kind, source)`` for one generated contract."""
    kind = kind or rng.choice(KINDS)
    name = f"Gen{index}{kind.capitalize()}"
    bal = rng.choice(["balance", "bal", "holdings"])
    s = _ident(rng, "s")
    extra = _ident(rng, "meta")
    lines = [f"contract {name} {{", f"    mapping(address => uint) {bal};",
             f"    uint {extra} = {rng.randrange(0, 50)};"]
    body = []
    ret = f"{bal}[a]"
    if kind == "rebase":
        lines.append(f"    uint {s} = 1;")
        ret = f"{bal}[a] * {s}"
        body.append(f"""
    @owner_only
    rebase(uint t) {{
        {s} *= t;
    }}
""")
    elif kind == "mint":
        body.append(f"""
    @owner_only
    mint(address to, uint amount) {{
        {bal}[to] += amount;
        {extra} += 1;
    }}
""")
    elif kind == "burn":
        body.append(f"""
    burn(uint amount) {{
        {bal}[msg.sender] -= amount;
    }}
""")
    elif kind == "airdrop":
        lines.append(f"    uint {s} = 0;")
        ret = f"{bal}[a] + {s}"
        body.append(f"""
    @owner_only
    drop(uint amount) {{
        {s} += amount;
    }}
""")
    elif kind == "pause":
        lines.append("    bool paused = false;")
        body.append("""
    @owner_only
    toggle() {
        paused = !paused;
    }
""")
    elif kind == "chain2":
        lines.append(f"    uint {s} = 1;")
        lines.append("    uint pending = 0;")
        ret = f"{bal}[a] * {s}"
        body.append(f"""
    @owner_only
    stage(uint d) {{
        pending = d;
    }}

    @owner_only
    apply() {{
        {s} += pending;
        pending = 0;
    }}
""")
    elif kind == "fee":
        body.append(f"""
    pay(address to, uint amount) {{
        uint cut = amount / 100;
        {bal}[msg.sender] -= amount;
        {bal}[to] += amount - cut;
    }}
""")
    if kind == "pause":
        bal_fn = f"""
    balanceOf(address a) returns (uint) {{
        if (paused) {{
            return 0;
        }}
        return {ret};
    }}
"""
    else:
        bal_fn = f"""
    balanceOf(address a) returns (uint) {{
        return {ret};
    }}
"""
    filler = f"""
    note(uint v) {{
        if (v > {rng.randrange(1, 100)}) {{
            {extra} = v;
        }} else {{
            {extra} += 1;
        }}
    }}
"""
    parts = ["\n".join(lines), bal_fn, _TRANSFER.format(bal=bal), *body, filler, "}\n"]
    return kind, "".join(parts)


def generate_corpus(count, seed=0):
    """Deterministic list of ``(filename, kind, source)``."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        kind, src = generate_contract(rng, i)
        out.append((f"gen_{i:05d}_{kind}.tok", kind, src))
    return out
