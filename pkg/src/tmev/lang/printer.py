from . import ast as A
from .parser import _BINARY_PREC

_INDENT = "    "


def format_expr(e, parent_prec=0):
    if isinstance(e, A.Num):
        text = str(e.value)
        return f"({text})" if e.value < 0 and parent_prec else text
    if isinstance(e, A.Bool):
        return "true" if e.value else "false"
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.Sender):
        return "msg.sender"
    if isinstance(e, A.Index):
        return f"{e.base}[{format_expr(e.key)}]"
    if isinstance(e, A.Unary):
        inner = format_expr(e.operand, 7)
        if isinstance(e.operand, (A.Binary,)) or (
                isinstance(e.operand, A.Num) and e.operand.value < 0):
            inner = f"({format_expr(e.operand)})"
        return f"{e.op}{inner}"
    if isinstance(e, A.Binary):
        prec = _BINARY_PREC[e.op]
        left = format_expr(e.left, prec)
        right = format_expr(e.right, prec + 1)
        if isinstance(e.left, A.Binary) and _BINARY_PREC[e.left.op] < prec:
            left = f"({format_expr(e.left)})"
        if isinstance(e.right, A.Binary) and _BINARY_PREC[e.right.op] <= prec:
            right = f"({format_expr(e.right)})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def _format_target(t):
    return format_expr(t)


def _format_block(body, depth, out):
    pad = _INDENT * depth
    for s in body:
        if isinstance(s, A.LocalDecl):
            out.append(f"{pad}{s.kind} {s.name} = {format_expr(s.expr)};")
        elif isinstance(s, A.Assign):
            out.append(f"{pad}{_format_target(s.target)} = {format_expr(s.expr)};")
        elif isinstance(s, A.CompoundAssign):
            out.append(f"{pad}{_format_target(s.target)} {s.op} {format_expr(s.expr)};")
        elif isinstance(s, A.Return):
            if s.expr is None:
                out.append(f"{pad}return;")
            else:
                out.append(f"{pad}return {format_expr(s.expr)};")
        elif isinstance(s, A.If):
            out.append(f"{pad}if ({format_expr(s.cond)}) {{")
            _format_block(s.then, depth + 1, out)
            if s.orelse:
                out.append(f"{pad}}} else {{")
                _format_block(s.orelse, depth + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(s, A.While):
            out.append(f"{pad}while ({format_expr(s.cond)}) {{")
            _format_block(s.body, depth + 1, out)
            out.append(f"{pad}}}")
        else:
            raise TypeError(f"not a statement: {s!r}")


def format_stmt(s):
    out = []
    _format_block([s], 0, out)
    return "\n".join(out)


def _format_literal(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def format_contract(c):
    out = [f"contract {c.name} {{"]
    for v in c.state_vars:
        kind = "mapping(address => uint)" if v.kind == "mapping" else v.kind
        init = "" if v.initializer is None else f" = {_format_literal(v.initializer)}"
        out.append(f"{_INDENT}{kind} {v.name}{init};")
    for f in c.functions:
        params = ", ".join(f"{p.kind} {p.name}" for p in f.params)
        returns = f" returns ({f.returns})" if f.returns else ""
        if f.owner_only:
            out.append(f"{_INDENT}@owner_only")
        out.append(f"{_INDENT}{f.name}({params}){returns} {{")
        _format_block(f.body, 2, out)
        out.append(f"{_INDENT}}}")
    out.append("}")
    return "\n".join(out)


def pretty_print(unit):
    """Render a SourceUnit as TokenLang text that re-parses to an equal unit."""
    return "\n\n".join(format_contract(c) for c in unit.contracts) + "\n"
