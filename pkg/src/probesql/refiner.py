"""Post-generation refinement.

Execution errors are repaired directly from engine feedback. Empty results
go through three stages: isolate each condition as its own query and
execute it, hypothesize a cause from the five-cause taxonomy, probe for a
fix, then rewrite. The final answer never executes worse than the input.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .catalog import DatabaseCatalog, ValueIndex
from .executor import Database, ExecutionOutcome, Limits, Status
from .explorer import ProbeResult, SqlProbe
from .llm import (
    CAUSE_TAGS, LlmClient, LlmRequest, SamplingParams, ask_structured,
    extract_sql_blocks,
)
from .sqlkit import (
    Binary, ColumnRef, FuncCall, InSelect, Select, SelectCore, SelectItem,
    SubSql, SubqueryExpr, TableRef, conjoin, condition_units, decompose,
    flatten_conjunction, iter_sources, parse, quote_ident, render,
    strip_select_items, table_scope,
)
from .errors import ParseFailure, WouldEmptySelectList


@dataclass(frozen=True)
class RefinerConfig:
    max_feedback_attempts: int = 3      # direct-repair retries on error feedback
    max_refine_iterations: int = 2      # empty-result diagnose/modify rounds
    max_solution_probes: int = 8
    distinct_probe_limit: int = 10
    temperature: float = 0.0


@dataclass
class ErrorCause:
    tag: str                            # one of llm.CAUSE_TAGS
    rationale: str
    implicated_units: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.tag not in CAUSE_TAGS:
            raise ValueError(f"unknown cause tag {self.tag!r}")

    def to_dict(self) -> dict:
        return {"tag": self.tag, "rationale": self.rationale,
                "implicated_units": self.implicated_units}


@dataclass
class SubResult:
    sub: SubSql
    outcome: ExecutionOutcome

    def to_dict(self) -> dict:
        return {"sql": self.sub.sql, "kind": self.sub.kind,
                "unit_sql": self.sub.unit.sql if self.sub.unit else None,
                "outcome": self.outcome.to_dict()}


@dataclass
class RefinementTrace:
    route: str = "no_refinement"
    sub_sql_results: list[SubResult] = field(default_factory=list)
    not_decomposable: bool = False
    hypotheses: list[ErrorCause] = field(default_factory=list)
    solution_probes: list[ProbeResult] = field(default_factory=list)
    revisions: list[dict] = field(default_factory=list)    # {stage, sql, status}
    flags: list[str] = field(default_factory=list)

    def record_revision(self, stage: str, sql: str, status: Status) -> None:
        self.revisions.append({"stage": stage, "sql": sql, "status": status.value})

    def to_dict(self) -> dict:
        return {
            "route": self.route,
            "sub_sql_results": [r.to_dict() for r in self.sub_sql_results],
            "not_decomposable": self.not_decomposable,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "solution_probes": [r.to_dict() for r in self.solution_probes],
            "revisions": self.revisions,
            "flags": self.flags,
        }


def route(outcome: ExecutionOutcome) -> str:
    if outcome.status in (Status.ERROR, Status.TIMEOUT):
        return "error_feedback"
    if outcome.status == Status.EMPTY:
        return "empty_result"
    return "no_refinement"


_RANK = {Status.ROWS: 0, Status.EMPTY: 1, Status.ERROR: 2, Status.TIMEOUT: 2}


class _BestSoFar:
    """Keeps the best (sql, outcome) seen; later entries win rank ties."""

    def __init__(self, sql: str, outcome: ExecutionOutcome):
        self.sql = sql
        self.outcome = outcome

    def offer(self, sql: str, outcome: ExecutionOutcome) -> None:
        if _RANK[outcome.status] <= _RANK[self.outcome.status]:
            self.sql = sql
            self.outcome = outcome


def repair_with_feedback(sql: str, error_message: str, schema_text: str,
                         question: str, db: Database, client: LlmClient,
                         limits: Limits, config: RefinerConfig | None = None,
                         trace: RefinementTrace | None = None,
                         ) -> tuple[str, ExecutionOutcome]:
    """Direct revision from engine feedback, re-executing after each attempt."""
    config = config or RefinerConfig()
    trace = trace if trace is not None else RefinementTrace(route="error_feedback")
    outcome = db.execute(sql, limits)
    best = _BestSoFar(sql, outcome)
    if outcome.status == Status.ROWS:
        return sql, outcome
    message = error_message or outcome.error_message
    current = sql
    for _ in range(config.max_feedback_attempts):
        request = LlmRequest(
            template_id="error_feedback_repair",
            bindings={"sql": current, "error_message": message,
                      "schema": schema_text, "question": question},
            sampling=SamplingParams(temperature=config.temperature))
        blocks, _, failed = ask_structured(client, request, "sql_blocks", fallback=None)
        if failed or not blocks:
            trace.flags.append("repair_unparseable_revision")
            continue
        revised = blocks[0]
        outcome = db.execute(revised, limits)
        trace.record_revision("error_feedback", revised, outcome.status)
        best.offer(revised, outcome)
        if outcome.status == Status.ROWS:
            return revised, outcome
        if outcome.status == Status.ERROR:
            message = outcome.error_message
            current = revised
    trace.flags.append("repair_exhausted")
    return best.sql, best.outcome


def run_sub_sqls(sql: str, db: Database, limits: Limits) -> tuple[list[SubResult], bool]:
    """Decompose and execute; second element reports non-decomposability."""
    try:
        ast = parse(sql)
    except Exception:
        return [], True
    subs = decompose(ast)
    if not subs:
        return [], True
    return [SubResult(sub=s, outcome=db.execute(s.sql, limits)) for s in subs], False


def _sub_digest(sub_results: list[SubResult]) -> str:
    lines = []
    for i, result in enumerate(sub_results):
        label = result.sub.unit.sql if result.sub.unit else "(join skeleton, no conditions)"
        if result.outcome.status == Status.ROWS:
            state = f"{result.outcome.row_count} rows"
        elif result.outcome.status == Status.EMPTY:
            state = "no rows"
        else:
            state = "error: " + (result.outcome.error_message or "?").splitlines()[0]
        lines.append(f"[{i}] {label} -> {state}")
    return "\n".join(lines) or "(not decomposable)"


def heuristic_causes(sub_results: list[SubResult]) -> list[ErrorCause]:
    """Deterministic tagging from the isolated-condition outcomes alone."""
    causes: list[ErrorCause] = []
    unit_indices = [i for i, r in enumerate(sub_results) if r.sub.unit is not None]
    empty_units = [i for i in unit_indices
                   if sub_results[i].outcome.status == Status.EMPTY]
    rowful_units = [i for i in unit_indices
                    if sub_results[i].outcome.status == Status.ROWS]
    skeleton = [i for i, r in enumerate(sub_results) if r.sub.kind == "join_skeleton"]
    if skeleton and sub_results[skeleton[0]].outcome.status == Status.EMPTY:
        causes.append(ErrorCause(
            tag="unnecessary_table_joins",
            rationale="the join skeleton alone returns no rows",
            implicated_units=skeleton))
    if empty_units:
        causes.append(ErrorCause(
            tag="column_value_mismatch",
            rationale="some conditions find no rows even in isolation",
            implicated_units=empty_units))
    if unit_indices and not empty_units and len(unit_indices) >= 2:
        causes.append(ErrorCause(
            tag="condition_conflict",
            rationale="every condition finds rows alone, so their combination conflicts",
            implicated_units=rowful_units))
    return causes[:3]


def _consistent(cause: ErrorCause, sub_results: list[SubResult]) -> bool:
    # a unit whose isolated query returned rows cannot alone carry a mismatch tag
    if cause.tag == "column_value_mismatch" and cause.implicated_units:
        return any(sub_results[i].outcome.status == Status.EMPTY
                   for i in cause.implicated_units if i < len(sub_results))
    return True


def identify_error_cause(sql: str, sub_results: list[SubResult], question: str,
                         schema_text: str, client: LlmClient,
                         config: RefinerConfig | None = None,
                         ) -> tuple[list[ErrorCause], list[str]]:
    """LLM diagnosis over the isolated-condition outcomes.

    Returns (hypotheses, model-proposed probe SQL). Free-form cause wording
    maps onto the closed five-cause set; hypotheses inconsistent with the
    observed outcomes are dropped, and the deterministic heuristics back
    everything up.
    """
    config = config or RefinerConfig()
    request = LlmRequest(
        template_id="solution_exploration",
        bindings={"sql": sql, "question": question, "schema": schema_text,
                  "sub_sql_digest": _sub_digest(sub_results)},
        sampling=SamplingParams(temperature=config.temperature))
    parsed, completion, failed = ask_structured(client, request, "cause_list",
                                                fallback=None)
    model_probes = extract_sql_blocks(completion) if completion else []
    causes: list[ErrorCause] = []
    if not failed and parsed:
        empty_units = [i for i, r in enumerate(sub_results)
                       if r.sub.unit is not None and r.outcome.status == Status.EMPTY]
        skeleton = [i for i, r in enumerate(sub_results)
                    if r.sub.kind == "join_skeleton"]
        unit_indices = [i for i, r in enumerate(sub_results) if r.sub.unit is not None]
        for tag, rationale in parsed:
            if tag == "column_value_mismatch":
                implicated = empty_units
            elif tag == "unnecessary_table_joins":
                implicated = skeleton
            elif tag == "subquery_scope_inconsistency":
                implicated = [i for i in unit_indices
                              if _has_subquery(sub_results[i].sub.unit.predicate)]
            else:
                implicated = unit_indices
            cause = ErrorCause(tag=tag, rationale=rationale,
                               implicated_units=implicated)
            if _consistent(cause, sub_results):
                causes.append(cause)
    if not causes:
        causes = heuristic_causes(sub_results)
    return causes[:3], model_probes


def _has_subquery(expr) -> bool:
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, (SubqueryExpr, InSelect)):
            return True
        if isinstance(node, Binary):
            stack.extend([node.left, node.right])
        elif hasattr(node, "expr"):
            stack.append(node.expr)
        elif hasattr(node, "operand"):
            stack.append(node.operand)
    return False


# --- solution probes ---

def _resolve_unit_column(ast: Select, catalog: DatabaseCatalog,
                         table: str | None, column: str) -> tuple[str, str] | None:
    scope = table_scope(ast.core)
    if table is not None:
        real = scope.get(table.lower())
        if real and catalog.has_column(real, column):
            return (real, column)
        return None
    for real in scope.values():
        if catalog.has_column(real, column):
            return (real, column)
    return None


def _drop_unit_probe(ast: Select, drop_index: int) -> str | None:
    units = condition_units(ast)
    if drop_index >= len(units) or len(units) < 2:
        return None
    keep = [copy.deepcopy(u.predicate) for i, u in enumerate(units) if i != drop_index]
    probe_ast = copy.deepcopy(ast)
    probe_ast.core.where = conjoin(keep)
    return render(probe_ast)


def _prefix_join_probes(ast: Select) -> list[str]:
    core = ast.core
    if core.source is None or not core.joins:
        return []
    probes = []
    for upto in range(len(core.joins) + 1):
        partial = SelectCore(items=[SelectItem(expr=FuncCall("COUNT", star=True))],
                             source=copy.deepcopy(core.source),
                             joins=copy.deepcopy(core.joins[:upto]))
        probes.append(render(Select(cores=[partial])))
    return probes


def _first_subquery(expr):
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, SubqueryExpr):
            return node.select
        if isinstance(node, InSelect):
            return node.select
        if isinstance(node, Binary):
            stack.extend([node.right, node.left])
        elif hasattr(node, "expr"):
            stack.append(node.expr)
    return None


def explore_solutions(sql: str, hypotheses: list[ErrorCause],
                      sub_results: list[SubResult], catalog: DatabaseCatalog,
                      index: ValueIndex | None, db: Database, limits: Limits,
                      config: RefinerConfig | None = None,
                      extra_probe_sql: list[str] | None = None,
                      ) -> list[ProbeResult]:
    """Execute targeted probes for each hypothesis, within budget.

    Recipes per cause: conflicting/duplicated conditions get drop-one
    variants and alternate-column swaps; mismatched columns get DISTINCT
    format probes plus value-index alternatives; join problems get
    progressively longer join prefixes; scope problems run the subquery
    standalone and its aggregate over the outer join scope.
    """
    config = config or RefinerConfig()
    try:
        ast = parse(sql)
    except Exception:
        return []
    probes: list[SqlProbe] = []
    seen: set[str] = set()

    def add(probe_sql: str, description: str) -> None:
        if probe_sql and probe_sql not in seen and len(probes) < config.max_solution_probes:
            seen.add(probe_sql)
            probes.append(SqlProbe(kind="solution", sql=probe_sql,
                                   probe_id=len(probes), description=description))

    for probe_sql in (extra_probe_sql or []):
        try:
            parse(probe_sql)
        except Exception:
            continue
        add(probe_sql, "model-proposed probe")

    for cause in hypotheses:
        if cause.tag in ("condition_conflict", "condition_duplication"):
            for unit_index in cause.implicated_units:
                unit_pos = _unit_position(sub_results, unit_index)
                if unit_pos is not None:
                    add(_drop_unit_probe(ast, unit_pos) or "",
                        f"drop condition [{unit_index}]")
            _alternate_column_probes(ast, cause, sub_results, catalog, index, add)
        elif cause.tag == "column_value_mismatch":
            for unit_index in cause.implicated_units:
                if unit_index >= len(sub_results):
                    continue
                unit = sub_results[unit_index].sub.unit
                if unit is None:
                    continue
                for table, column in unit.columns:
                    resolved = _resolve_unit_column(ast, catalog, table, column)
                    if resolved is None:
                        continue
                    t, c = resolved
                    add(f"SELECT DISTINCT {quote_ident(c)} FROM {quote_ident(t)} "
                        f"LIMIT {config.distinct_probe_limit}",
                        f"stored format of {t}.{c}")
            _alternate_column_probes(ast, cause, sub_results, catalog, index, add)
        elif cause.tag == "unnecessary_table_joins":
            for probe_sql in _prefix_join_probes(ast):
                add(probe_sql, "join prefix row count")
        elif cause.tag == "subquery_scope_inconsistency":
            where = ast.core.where
            sub_select = _first_subquery(where) if where is not None else None
            if sub_select is not None:
                add(render(sub_select), "subquery standalone")
                outer = copy.deepcopy(ast)
                outer.core.items = copy.deepcopy(sub_select.cores[0].items)
                outer.core.where = None
                outer.core.group_by = []
                outer.core.having = None
                add(render(outer), "subquery aggregate over the outer join scope")

    return [ProbeResult(probe=p, outcome=db.execute(p.sql, limits)) for p in probes]


def _unit_position(sub_results: list[SubResult], unit_index: int) -> int | None:
    """Map a sub-result index to its position among the WHERE units."""
    if unit_index >= len(sub_results):
        return None
    position = 0
    for i, result in enumerate(sub_results):
        if result.sub.kind != "where_unit":
            continue
        if i == unit_index:
            return position
        position += 1
    return None


def _alternate_column_probes(ast: Select, cause: ErrorCause,
                             sub_results: list[SubResult],
                             catalog: DatabaseCatalog, index: ValueIndex | None,
                             add) -> None:
    if index is None:
        return
    for unit_index in cause.implicated_units:
        if unit_index >= len(sub_results):
            continue
        unit = sub_results[unit_index].sub.unit
        if unit is None:
            continue
        for literal in unit.literals:
            if not isinstance(literal, str):
                continue
            for table, column, value in index.lookup(literal)[:3]:
                escaped = value.replace("'", "''")
                add(f"SELECT COUNT(*) FROM {quote_ident(table)} WHERE "
                    f"{quote_ident(column)} = '{escaped}'",
                    f"alternate column {table}.{column} for '{literal}'")


def modify(sql: str, question: str, schema_text: str,
           hypotheses: list[ErrorCause], solution_probes: list[ProbeResult],
           client: LlmClient, db: Database, limits: Limits,
           config: RefinerConfig | None = None,
           ) -> tuple[str, ExecutionOutcome | None]:
    """One rewrite pass from the diagnosis; returns (sql, outcome-or-None)."""
    config = config or RefinerConfig()
    hypothesis_lines = "\n".join(
        f"- {c.tag.replace('_', ' ')}: {c.rationale}" for c in hypotheses) or "(none)"
    probe_lines = []
    for result in solution_probes:
        outcome = result.outcome
        if outcome.status == Status.ROWS:
            first = outcome.first_row() or ()
            preview = ", ".join(str(v)[:40] for v in list(first)[:5])
            state = f"{outcome.row_count} rows | first: ({preview})"
        elif outcome.status == Status.EMPTY:
            state = "(no rows)"
        else:
            state = "error: " + (outcome.error_message or "?").splitlines()[0]
        probe_lines.append(f"{result.probe.sql} -> {state}")
    request = LlmRequest(
        template_id="final_refinement",
        bindings={"sql": sql, "question": question, "schema": schema_text,
                  "hypotheses": hypothesis_lines,
                  "probe_digest": "\n".join(probe_lines) or "(none)"},
        sampling=SamplingParams(temperature=config.temperature))
    blocks, _, failed = ask_structured(client, request, "sql_blocks", fallback=None)
    if failed or not blocks:
        return sql, None
    revised = blocks[0]
    try:
        parse(revised)
    except Exception:
        return sql, None
    return revised, db.execute(revised, limits)


def refine_empty_result(sql: str, question: str, schema_text: str,
                        catalog: DatabaseCatalog, index: ValueIndex | None,
                        db: Database, client: LlmClient, limits: Limits,
                        config: RefinerConfig | None = None,
                        trace: RefinementTrace | None = None,
                        explore: bool = True) -> tuple[str, ExecutionOutcome]:
    """Diagnose-and-modify loop for empty results, bounded and fixpoint-stopped."""
    config = config or RefinerConfig()
    trace = trace if trace is not None else RefinementTrace(route="empty_result")
    best = _BestSoFar(sql, db.execute(sql, limits))
    current = sql
    for _ in range(config.max_refine_iterations):
        sub_results: list[SubResult] = []
        hypotheses: list[ErrorCause] = []
        probe_results: list[ProbeResult] = []
        model_probes: list[str] = []
        if explore:
            sub_results, not_decomposable = run_sub_sqls(current, db, limits)
            trace.sub_sql_results = sub_results
            trace.not_decomposable = not_decomposable
            hypotheses, model_probes = identify_error_cause(
                current, sub_results, question, schema_text, client, config)
            trace.hypotheses = hypotheses
            probe_results = explore_solutions(
                current, hypotheses, sub_results, catalog, index, db, limits,
                config, extra_probe_sql=model_probes)
            trace.solution_probes = probe_results
        revised, outcome = modify(current, question, schema_text, hypotheses,
                                  probe_results, client, db, limits, config)
        if outcome is None:
            trace.flags.append("modify_unparseable_revision")
            break
        trace.record_revision("modification", revised, outcome.status)
        best.offer(revised, outcome)
        if outcome.status == Status.ROWS:
            return revised, outcome
        if revised == current:
            trace.flags.append("modify_fixpoint")
            break
        current = revised
    trace.flags.append("refinement_exhausted")
    return best.sql, best.outcome


def check_targets(sql: str, question: str, evidence: str, db: Database,
                  client: LlmClient, limits: Limits,
                  config: RefinerConfig | None = None,
                  ) -> tuple[str, set[int], list[str]]:
    """Removal-only select-list verification; fail-safe to identity.

    Returns (sql, removed indices, flags). The output re-executes at least
    as well as the input (a rewrite that downgrades the status is reverted).
    """
    config = config or RefinerConfig()
    flags: list[str] = []
    try:
        ast = parse(sql)
    except Exception:
        return sql, set(), ["target_check_unparseable_input"]
    items = ast.core.items
    if len(items) < 2:
        return sql, set(), flags
    item_lines = "\n".join(f"{i}: {render(item.expr)}" for i, item in enumerate(items))
    request = LlmRequest(
        template_id="target_checking",
        bindings={"sql": sql, "question": question, "evidence": evidence or "",
                  "select_items": item_lines},
        sampling=SamplingParams(temperature=config.temperature))
    remove, _, failed = ask_structured(client, request, "keep_remove",
                                       fallback=None, n_items=len(items))
    if failed or not remove:
        if failed:
            flags.append("target_check_unparseable_verdict")
        return sql, set(), flags
    try:
        stripped = strip_select_items(ast, remove)
    except (WouldEmptySelectList, IndexError):
        return sql, set(), flags + ["target_check_invalid_remove_set"]
    before = db.execute(sql, limits)
    after = db.execute(stripped, limits)
    if _RANK[after.status] > _RANK[before.status]:
        return sql, set(), flags + ["target_check_status_downgrade_reverted"]
    return stripped, remove, flags
