import re
from dataclasses import dataclass

from .errors import LangSyntaxError

KEYWORDS = {
    "contract", "returns", "mapping", "address", "int", "uint", "int256",
    "uint256", "bool", "if", "else", "while", "return", "true", "false",
    "msg", "function",
}

# Longest operators first so that "+=" wins over "+".
OPERATORS = [
    "=>", "+=", "-=", "*=", "/=", "==", "!=", "<=", ">=", "&&", "||",
    "{", "}", "(", ")", "[", "]", ";", ",", "=", "+", "-", "*", "/",
    "<", ">", "!", ".", "@",
]

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<nl>\n)"
    r"|(?P<line_comment>//[^\n]*)"
    r"|(?P<block_comment>/\*)"
    r"|(?P<int>[0-9]+(?:[eE][0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>" + "|".join(re.escape(op) for op in OPERATORS) + r")"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "kw", "op", "eof"
    value: object
    line: int
    col: int
    length: int = 1

    def __str__(self):
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)

    @property
    def text(self):
        return str(self.value)


def _int_value(text):
    if "e" in text or "E" in text:
        mant, exp = re.split("[eE]", text)
        return int(mant) * 10 ** int(exp)
    return int(text)


def tokenize(source):
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise LangSyntaxError(line, col, f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "block_comment":
            end = source.find("*/", m.end())
            if end < 0:
                raise LangSyntaxError(line, col, "unterminated block comment")
            body = source[pos:end + 2]
            newlines = body.count("\n")
            if newlines:
                line += newlines
                line_start = pos + body.rfind("\n") + 1
            pos = end + 2
            continue
        elif kind == "int":
            tokens.append(Token("int", _int_value(text), line, col, len(text)))
        elif kind == "ident":
            tok_kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(tok_kind, text, line, col, len(text)))
        elif kind == "op":
            tokens.append(Token("op", text, line, col, len(text)))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, 1))
    return tokens
