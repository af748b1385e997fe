"""WHERE-clause decomposition and select-list surgery.

A *condition unit* is a maximal AND-free subtree of a top-level WHERE
conjunction. Isolating one unit over the original FROM skeleton yields a
diagnostic query whose rows are a superset of the full query's rows.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from ..errors import UnknownColumn, WouldEmptySelectList
from .nodes import (
    Between, Binary, Case, Cast, ColumnRef, Exists, FuncCall, InList,
    InSelect, IsNull, Join, Like, Literal, Select, SelectCore, Star,
    SubqueryExpr, SubquerySource, TableRef, Unary, table_scope,
)
from .parser import parse
from .render import render


@dataclass
class ConditionUnit:
    predicate: object
    columns: list[tuple[str | None, str]]   # (table-or-alias, column) as written
    literals: list[object]
    source_span: tuple[int, int] | None = None
    clause: str = "where"                   # "where" or "having"

    @property
    def sql(self) -> str:
        return render(self.predicate)


@dataclass
class SubSql:
    sql: str
    unit: ConditionUnit | None = None       # None for the join-skeleton probe
    kind: str = "where_unit"                # where_unit | having_unit | join_skeleton


def flatten_conjunction(expr) -> list:
    """Return the maximal AND-free subtrees of a conjunction, left to right."""
    if isinstance(expr, Binary) and expr.op == "AND":
        return flatten_conjunction(expr.left) + flatten_conjunction(expr.right)
    return [expr]


def conjoin(predicates: list):
    """Rebuild a left-deep AND chain; None for an empty list."""
    node = None
    for pred in predicates:
        node = pred if node is None else Binary("AND", node, pred)
    return node


def referenced_columns(expr) -> list[tuple[str | None, str]]:
    """Column references in an expression, in source order, without duplicates.

    Does not descend into subqueries: a subquery's columns live in its own
    scope.
    """
    found: list[tuple[str | None, str]] = []

    def visit(node):
        if isinstance(node, ColumnRef):
            key = (node.table, node.column)
            if key not in found:
                found.append(key)
        elif isinstance(node, Binary):
            visit(node.left)
            visit(node.right)
        elif isinstance(node, Unary):
            visit(node.operand)
        elif isinstance(node, Between):
            visit(node.expr), visit(node.low), visit(node.high)
        elif isinstance(node, InList):
            visit(node.expr)
            for item in node.items:
                visit(item)
        elif isinstance(node, (InSelect, Like, IsNull)):
            visit(node.expr)
            if isinstance(node, Like):
                visit(node.pattern)
        elif isinstance(node, FuncCall):
            for arg in node.args:
                visit(arg)
        elif isinstance(node, Case):
            if node.operand is not None:
                visit(node.operand)
            for cond, result in node.whens:
                visit(cond), visit(result)
            if node.default is not None:
                visit(node.default)
        elif isinstance(node, Cast):
            visit(node.expr)

    visit(expr)
    return found


def referenced_literals(expr) -> list:
    """Literal values in an expression, in source order."""
    found: list = []

    def visit(node):
        if isinstance(node, Literal):
            found.append(node.value)
        elif isinstance(node, Binary):
            visit(node.left), visit(node.right)
        elif isinstance(node, Unary):
            visit(node.operand)
        elif isinstance(node, Between):
            visit(node.expr), visit(node.low), visit(node.high)
        elif isinstance(node, InList):
            visit(node.expr)
            for item in node.items:
                visit(item)
        elif isinstance(node, (InSelect, IsNull)):
            visit(node.expr)
        elif isinstance(node, Like):
            visit(node.expr), visit(node.pattern)
        elif isinstance(node, FuncCall):
            for arg in node.args:
                visit(arg)
        elif isinstance(node, Case):
            if node.operand is not None:
                visit(node.operand)
            for cond, result in node.whens:
                visit(cond), visit(result)
            if node.default is not None:
                visit(node.default)
        elif isinstance(node, Cast):
            visit(node.expr)

    visit(expr)
    return found


def _unit_from(pred, clause: str) -> ConditionUnit:
    return ConditionUnit(
        predicate=pred,
        columns=referenced_columns(pred),
        literals=referenced_literals(pred),
        source_span=getattr(pred, "span", None),
        clause=clause,
    )


def condition_units(ast: Select) -> list[ConditionUnit]:
    """Units of the outermost core's top-level WHERE conjunction."""
    core = ast.core
    if core.where is None:
        return []
    return [_unit_from(p, "where") for p in flatten_conjunction(core.where)]


def having_units(ast: Select) -> list[ConditionUnit]:
    core = ast.core
    if core.having is None:
        return []
    return [_unit_from(p, "having") for p in flatten_conjunction(core.having)]


def _skeleton(core: SelectCore) -> SelectCore:
    """Copy of a core with WHERE/GROUP BY/HAVING removed."""
    bare = copy.deepcopy(core)
    bare.where = None
    bare.group_by = []
    bare.having = None
    return bare


def _single_core_select(core: SelectCore) -> Select:
    return Select(cores=[core])


def decompose(ast: Select) -> list[SubSql]:
    """One diagnostic query per condition unit, plus a join skeleton.

    Each WHERE-unit query keeps the original select list, FROM/JOIN skeleton
    and GROUP BY, with WHERE reduced to that single unit. HAVING units keep
    GROUP BY and drop the WHERE. With two or more joined tables an extra
    unconditioned join-skeleton query diagnoses over-joining. Returns an
    empty list when there is nothing to decompose (no WHERE, no HAVING, at
    most one table).
    """
    core = ast.core
    subs: list[SubSql] = []

    for unit in condition_units(ast):
        sub_core = _skeleton(core)
        sub_core.group_by = copy.deepcopy(core.group_by)
        sub_core.where = copy.deepcopy(unit.predicate)
        subs.append(SubSql(sql=render(_single_core_select(sub_core)), unit=unit,
                           kind="where_unit"))

    for unit in having_units(ast):
        sub_core = _skeleton(core)
        sub_core.group_by = copy.deepcopy(core.group_by)
        sub_core.having = copy.deepcopy(unit.predicate)
        subs.append(SubSql(sql=render(_single_core_select(sub_core)), unit=unit,
                           kind="having_unit"))

    n_sources = (1 if core.source is not None else 0) + len(core.joins)
    if n_sources >= 2:
        subs.append(SubSql(sql=render(_single_core_select(_skeleton(core))),
                           unit=None, kind="join_skeleton"))
    return subs


def strip_select_items(ast: Select, remove: set[int]) -> str:
    """Render with the given select-list indices removed from every core.

    `remove` must leave at least one item; anything else raises
    WouldEmptySelectList. Indices outside the list raise IndexError.
    """
    n_items = len(ast.core.items)
    for idx in remove:
        if idx < 0 or idx >= n_items:
            raise IndexError(f"select-list index {idx} out of range")
    if len(remove) >= n_items:
        raise WouldEmptySelectList(f"removing {sorted(remove)} would empty the select list")
    if not remove:
        return render(ast)
    trimmed = copy.deepcopy(ast)
    for core in trimmed.cores:
        core.items = [item for i, item in enumerate(core.items) if i not in remove]
    return render(trimmed)


@dataclass
class ProbeCondition:
    column: str                      # "table.column" or bare column name
    operator: str = "="              # comparison op, or IS NULL / IS NOT NULL
    value: object = None             # literal; None for unary operators

    def column_parts(self) -> tuple[str | None, str]:
        if "." in self.column:
            table, column = self.column.split(".", 1)
            return table, column
        return None, self.column


_UNARY_OPS = {"IS NULL": True, "IS NOT NULL": True}


def condition_predicate(cond: ProbeCondition):
    table, column = cond.column_parts()
    ref = ColumnRef(table, column)
    op = cond.operator.upper().strip()
    if op in _UNARY_OPS:
        return IsNull(ref, negated=(op == "IS NOT NULL"))
    if op in ("LIKE", "NOT LIKE"):
        return Like(ref, Literal(cond.value), negated=op.startswith("NOT"))
    if op in ("IN", "NOT IN"):
        values = cond.value if isinstance(cond.value, (list, tuple)) else [cond.value]
        return InList(ref, [Literal(v) for v in values], negated=op.startswith("NOT"))
    return Binary(op, ref, Literal(cond.value))


def build_probe_sql(skeleton: Select | str, condition: ProbeCondition) -> str:
    """Append one condition to a query's WHERE conjunction.

    A qualified condition column must name a table or alias visible in the
    skeleton's FROM scope (UnknownColumn otherwise). String values are
    escaped by quote doubling; the result re-parses.
    """
    ast = parse(skeleton) if isinstance(skeleton, str) else copy.deepcopy(skeleton)
    core = ast.core
    table, _ = condition.column_parts()
    if table is not None and core.source is not None:
        if table.lower() not in table_scope(core):
            raise UnknownColumn(f"table {table!r} is not in the query's FROM scope")
    pred = condition_predicate(condition)
    core.where = pred if core.where is None else Binary("AND", core.where, pred)
    return render(ast)


def ensure_table_in_scope(ast: Select, table: str,
                          join_on: tuple[str, str, str, str] | None = None) -> Select:
    """Copy of the query with `table` added to FROM when missing.

    `join_on` is an optional (left_table, left_column, right_table,
    right_column) equality used as the join condition; without it the table
    is attached as a comma cross join.
    """
    updated = copy.deepcopy(ast)
    core = updated.core
    if core.source is None:
        core.source = TableRef(table)
        return updated
    if table.lower() in table_scope(core):
        return updated
    if join_on is not None:
        lt, lc, rt, rc = join_on
        on = Binary("=", ColumnRef(lt, lc), ColumnRef(rt, rc))
        core.joins.append(Join(kind="JOIN", source=TableRef(table), on=on))
    else:
        core.joins.append(Join(kind=",", source=TableRef(table)))
    return updated
