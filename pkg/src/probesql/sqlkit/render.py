"""Deterministic SQL rendering for `nodes` trees.

Rendering is the inverse of parsing up to whitespace and identifier-quote
normalization: parse(render(parse(s))) is structurally equal to parse(s).
"""

from __future__ import annotations

import re

from .nodes import (
    Between, Binary, Case, Cast, ColumnRef, Exists, FuncCall, InList,
    InSelect, IsNull, Join, Like, Literal, Select, SelectCore, SelectItem,
    Star, SubqueryExpr, SubquerySource, TableRef, Unary,
)
from .tokens import IDENT_RE_TEXT, KEYWORDS

_IDENT_RE = re.compile(IDENT_RE_TEXT + r"\Z")

# (precedence, min precedence required of left child, of right child)
_BINARY_PREC = {
    "OR": (1, 1, 2),
    "AND": (2, 2, 3),
    "=": (4, 5, 5), "==": (4, 5, 5), "!=": (4, 5, 5), "<>": (4, 5, 5),
    "<": (4, 5, 5), "<=": (4, 5, 5), ">": (4, 5, 5), ">=": (4, 5, 5),
    "IS": (4, 5, 5), "IS NOT": (4, 5, 5),
    "+": (5, 5, 6), "-": (5, 5, 6), "||": (5, 5, 6),
    "*": (6, 6, 7), "/": (6, 6, 7), "%": (6, 6, 7),
}
_PREDICATE_PREC = 4
_NOT_PREC = 3
_UNARY_PREC = 7
_ATOM_PREC = 9


def quote_ident(name: str) -> str:
    if _IDENT_RE.match(name) and name.upper() not in KEYWORDS:
        return name
    return '"' + name.replace('"', '""') + '"'


def quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def render(node) -> str:
    """Render a statement or expression node to SQL text."""
    if isinstance(node, Select):
        return _select(node)
    return _expr(node, 0)


def _expr(node, min_prec: int) -> str:
    text, prec = _expr_prec(node)
    if prec < min_prec:
        return f"({text})"
    return text


def _expr_prec(node) -> tuple[str, int]:
    if isinstance(node, Literal):
        return _literal(node), _ATOM_PREC
    if isinstance(node, ColumnRef):
        if node.table:
            return f"{quote_ident(node.table)}.{quote_ident(node.column)}", _ATOM_PREC
        return quote_ident(node.column), _ATOM_PREC
    if isinstance(node, Star):
        return (f"{quote_ident(node.table)}.*" if node.table else "*"), _ATOM_PREC
    if isinstance(node, Binary):
        prec, left_min, right_min = _BINARY_PREC[node.op]
        left = _expr(node.left, left_min)
        right = _expr(node.right, right_min)
        return f"{left} {node.op} {right}", prec
    if isinstance(node, Unary):
        if node.op == "NOT":
            return f"NOT {_expr(node.operand, _NOT_PREC)}", _NOT_PREC
        inner = _expr(node.operand, _UNARY_PREC)
        if inner.startswith(node.op):
            inner = " " + inner
        return f"{node.op}{inner}", _UNARY_PREC
    if isinstance(node, Between):
        word = "NOT BETWEEN" if node.negated else "BETWEEN"
        return (f"{_expr(node.expr, 5)} {word} {_expr(node.low, 5)} "
                f"AND {_expr(node.high, 5)}"), _PREDICATE_PREC
    if isinstance(node, InList):
        word = "NOT IN" if node.negated else "IN"
        items = ", ".join(_expr(item, 0) for item in node.items)
        return f"{_expr(node.expr, 5)} {word} ({items})", _PREDICATE_PREC
    if isinstance(node, InSelect):
        word = "NOT IN" if node.negated else "IN"
        return f"{_expr(node.expr, 5)} {word} ({_select(node.select)})", _PREDICATE_PREC
    if isinstance(node, Like):
        word = f"NOT {node.op}" if node.negated else node.op
        text = f"{_expr(node.expr, 5)} {word} {_expr(node.pattern, 5)}"
        if node.escape is not None:
            text += f" ESCAPE {_expr(node.escape, 5)}"
        return text, _PREDICATE_PREC
    if isinstance(node, IsNull):
        word = "IS NOT NULL" if node.negated else "IS NULL"
        return f"{_expr(node.expr, 5)} {word}", _PREDICATE_PREC
    if isinstance(node, Exists):
        prefix = "NOT EXISTS" if node.negated else "EXISTS"
        return f"{prefix} ({_select(node.select)})", _PREDICATE_PREC
    if isinstance(node, FuncCall):
        if node.star:
            return f"{node.name}(*)", _ATOM_PREC
        args = ", ".join(_expr(arg, 0) for arg in node.args)
        if node.distinct:
            args = "DISTINCT " + args
        return f"{node.name}({args})", _ATOM_PREC
    if isinstance(node, Case):
        parts = ["CASE"]
        if node.operand is not None:
            parts.append(_expr(node.operand, 0))
        for cond, result in node.whens:
            parts.append(f"WHEN {_expr(cond, 0)} THEN {_expr(result, 0)}")
        if node.default is not None:
            parts.append(f"ELSE {_expr(node.default, 0)}")
        parts.append("END")
        return " ".join(parts), _ATOM_PREC
    if isinstance(node, Cast):
        return f"CAST({_expr(node.expr, 0)} AS {node.type_name})", _ATOM_PREC
    if isinstance(node, SubqueryExpr):
        return f"({_select(node.select)})", _ATOM_PREC
    raise TypeError(f"cannot render node of type {type(node).__name__}")


def _literal(node: Literal) -> str:
    value = node.value
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float)):
        return repr(value)
    return quote_string(value)


def _select(stmt: Select) -> str:
    parts = [_core(stmt.cores[0])]
    for op, core in zip(stmt.compound_ops, stmt.cores[1:]):
        parts.append(op)
        parts.append(_core(core))
    text = " ".join(parts)
    if stmt.order_by:
        terms = ", ".join(
            _expr(t.expr, 0) + (f" {t.direction}" if t.direction else "")
            for t in stmt.order_by)
        text += f" ORDER BY {terms}"
    if stmt.limit is not None:
        text += f" LIMIT {_expr(stmt.limit, 0)}"
        if stmt.offset is not None:
            text += f" OFFSET {_expr(stmt.offset, 0)}"
    return text


def _core(core: SelectCore) -> str:
    items = ", ".join(_select_item(item) for item in core.items)
    text = "SELECT " + ("DISTINCT " if core.distinct else "") + items
    if core.source is not None:
        text += " FROM " + _source(core.source)
        for join in core.joins:
            if join.kind == ",":
                text += ", " + _source(join.source)
            else:
                text += f" {join.kind} " + _source(join.source)
                if join.on is not None:
                    text += " ON " + _expr(join.on, 0)
    if core.where is not None:
        text += " WHERE " + _expr(core.where, 0)
    if core.group_by:
        text += " GROUP BY " + ", ".join(_expr(e, 0) for e in core.group_by)
    if core.having is not None:
        text += " HAVING " + _expr(core.having, 0)
    return text


def _select_item(item: SelectItem) -> str:
    text = _expr(item.expr, 0)
    if item.alias:
        text += f" AS {quote_ident(item.alias)}"
    return text


def _source(src) -> str:
    if isinstance(src, TableRef):
        text = quote_ident(src.name)
    elif isinstance(src, SubquerySource):
        text = f"({_select(src.select)})"
    else:
        raise TypeError(f"cannot render source of type {type(src).__name__}")
    if src.alias:
        text += f" AS {quote_ident(src.alias)}"
    return text
