"""AST node types for SELECT statements.

Nodes compare structurally (dataclass equality). The parser attaches a
``span`` attribute (character offsets into the source text) to expression
nodes as plain instance state, so spans never participate in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# --- expressions ---

@dataclass
class Literal:
    value: int | float | str | None


@dataclass
class ColumnRef:
    table: str | None
    column: str


@dataclass
class Star:
    table: str | None = None


@dataclass
class Unary:
    op: str            # "-", "+", "NOT"
    operand: object


@dataclass
class Binary:
    op: str            # arithmetic, comparison, "AND", "OR", "||"
    left: object
    right: object


@dataclass
class Between:
    expr: object
    low: object
    high: object
    negated: bool = False


@dataclass
class InList:
    expr: object
    items: list = field(default_factory=list)
    negated: bool = False


@dataclass
class InSelect:
    expr: object
    select: "Select" = None
    negated: bool = False


@dataclass
class Like:
    expr: object
    pattern: object
    op: str = "LIKE"   # LIKE or GLOB
    escape: object = None
    negated: bool = False


@dataclass
class IsNull:
    expr: object
    negated: bool = False


@dataclass
class Exists:
    select: "Select"
    negated: bool = False


@dataclass
class FuncCall:
    name: str
    args: list = field(default_factory=list)
    distinct: bool = False
    star: bool = False


@dataclass
class Case:
    operand: object
    whens: list = field(default_factory=list)   # (condition, result) pairs
    default: object = None


@dataclass
class Cast:
    expr: object
    type_name: str = ""


@dataclass
class SubqueryExpr:
    select: "Select"


# --- select structure ---

@dataclass
class SelectItem:
    expr: object
    alias: str | None = None


@dataclass
class TableRef:
    name: str
    alias: str | None = None


@dataclass
class SubquerySource:
    select: "Select"
    alias: str | None = None


@dataclass
class Join:
    kind: str                       # ",", "JOIN", "INNER JOIN", "LEFT JOIN", "CROSS JOIN", ...
    source: object                  # TableRef | SubquerySource
    on: object = None


@dataclass
class SelectCore:
    items: list = field(default_factory=list)
    distinct: bool = False
    source: object = None           # TableRef | SubquerySource | None
    joins: list = field(default_factory=list)
    where: object = None
    group_by: list = field(default_factory=list)
    having: object = None


@dataclass
class OrderingTerm:
    expr: object
    direction: str | None = None    # explicit "ASC"/"DESC" only when written


@dataclass
class Select:
    cores: list = field(default_factory=list)
    compound_ops: list = field(default_factory=list)   # len == len(cores) - 1
    order_by: list = field(default_factory=list)
    limit: object = None
    offset: object = None

    @property
    def core(self) -> SelectCore:
        return self.cores[0]


def iter_sources(core: SelectCore):
    """Yield every TableRef/SubquerySource of a core, in FROM order."""
    if core.source is not None:
        yield core.source
    for join in core.joins:
        yield join.source


def table_scope(core: SelectCore) -> dict[str, str]:
    """Map of lowercased visible names (aliases and table names) -> table name.

    Subquery sources map their alias to the alias itself.
    """
    scope: dict[str, str] = {}
    for src in iter_sources(core):
        if isinstance(src, TableRef):
            scope[src.name.lower()] = src.name
            if src.alias:
                scope[src.alias.lower()] = src.name
        elif isinstance(src, SubquerySource) and src.alias:
            scope[src.alias.lower()] = src.alias
    return scope
