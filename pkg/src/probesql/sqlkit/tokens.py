"""SQL tokenizer for the embedded-database SELECT dialect."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import SqlSyntaxError

# Words the parser gives syntactic meaning to; identifiers matching one of
# these must be quoted on output.
KEYWORDS = frozenset({
    "SELECT", "DISTINCT", "ALL", "FROM", "WHERE", "GROUP", "BY", "HAVING",
    "ORDER", "LIMIT", "OFFSET", "AS", "JOIN", "INNER", "LEFT", "RIGHT",
    "FULL", "OUTER", "CROSS", "ON", "USING", "AND", "OR", "NOT", "IN",
    "BETWEEN", "LIKE", "GLOB", "IS", "NULL", "EXISTS", "CASE", "WHEN",
    "THEN", "ELSE", "END", "CAST", "UNION", "INTERSECT", "EXCEPT", "ASC",
    "DESC", "ESCAPE",
})

_SYMBOLS = ("<>", "<=", ">=", "==", "!=", "||", "=", "<", ">", "+", "-",
            "*", "/", "%", "(", ")", ",", ".", ";")

IDENT_RE_TEXT = r"[A-Za-z_][A-Za-z0-9_]*"


@dataclass
class Token:
    kind: str          # IDENT, NUMBER, STRING, SYM, EOF
    value: str         # normalized value (unquoted identifier text, string body)
    start: int
    end: int
    quoted: bool = False

    def keyword(self) -> str | None:
        """Uppercase keyword name if this token can act as one."""
        if self.kind == "IDENT" and not self.quoted:
            up = self.value.upper()
            if up in KEYWORDS:
                return up
        return None


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            j = sql.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if sql.startswith("/*", i):
            j = sql.find("*/", i)
            if j < 0:
                raise SqlSyntaxError(i, "unterminated block comment")
            i = j + 2
            continue
        if c == "'":
            value, end = _read_quoted(sql, i, "'")
            tokens.append(Token("STRING", value, i, end))
            i = end
            continue
        if c in ('"', "`"):
            value, end = _read_quoted(sql, i, c)
            tokens.append(Token("IDENT", value, i, end, quoted=True))
            i = end
            continue
        if c.isdigit() or (c == "." and i + 1 < n and sql[i + 1].isdigit()):
            end = _read_number(sql, i)
            tokens.append(Token("NUMBER", sql[i:end], i, end))
            i = end
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", sql[i:j], i, j))
            i = j
            continue
        for sym in _SYMBOLS:
            if sql.startswith(sym, i):
                tokens.append(Token("SYM", sym, i, i + len(sym)))
                i += len(sym)
                break
        else:
            raise SqlSyntaxError(i, f"unexpected character {c!r}")
    tokens.append(Token("EOF", "", n, n))
    return tokens


def _read_quoted(sql: str, start: int, quote: str) -> tuple[str, int]:
    """Read a quoted region starting at `start`; doubled quotes escape."""
    parts: list[str] = []
    i = start + 1
    n = len(sql)
    while i < n:
        c = sql[i]
        if c == quote:
            if i + 1 < n and sql[i + 1] == quote:
                parts.append(quote)
                i += 2
                continue
            return "".join(parts), i + 1
        parts.append(c)
        i += 1
    raise SqlSyntaxError(start, f"unterminated {quote} literal")


def _read_number(sql: str, start: int) -> int:
    i = start
    n = len(sql)
    while i < n and sql[i].isdigit():
        i += 1
    if i < n and sql[i] == ".":
        i += 1
        while i < n and sql[i].isdigit():
            i += 1
    if i < n and sql[i] in "eE":
        j = i + 1
        if j < n and sql[j] in "+-":
            j += 1
        if j < n and sql[j].isdigit():
            i = j
            while i < n and sql[i].isdigit():
                i += 1
    return i
