"""SQL parsing, rendering, and WHERE-clause decomposition."""

from .nodes import (
    Between, Binary, Case, Cast, ColumnRef, Exists, FuncCall, InList,
    InSelect, IsNull, Join, Like, Literal, OrderingTerm, Select, SelectCore,
    SelectItem, Star, SubqueryExpr, SubquerySource, TableRef, Unary,
    iter_sources, table_scope,
)
from .parser import parse
from .render import quote_ident, quote_string, render
from .surgery import (
    ConditionUnit, ProbeCondition, SubSql, build_probe_sql, condition_units,
    conjoin, condition_predicate, decompose, ensure_table_in_scope,
    flatten_conjunction, having_units, referenced_columns,
    referenced_literals, strip_select_items,
)
