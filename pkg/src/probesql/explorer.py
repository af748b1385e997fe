"""Two-stage database exploration with probe queries before generation.

Stage 1 proposes target-column base probes and single-condition probes and
prunes condition candidates by execution. Stage 2 combines the survivors
and executes the combinations; empty combinations are unsuitable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .catalog import DatabaseCatalog
from .errors import EscalateToFullSchema
from .executor import Database, ExecutionOutcome, Limits, Status
from .linker import Entity
from .llm import (
    ExplorationPlan, LlmClient, LlmRequest, SamplingParams, ask_structured,
)
from .sqlkit import (
    ProbeCondition, Select, build_probe_sql, ensure_table_in_scope, parse,
    quote_ident, render,
)


@dataclass(frozen=True)
class ExplorerConfig:
    max_base_probes: int = 4
    max_condition_probes: int = 24      # per condition
    max_combination_probes: int = 16
    temperature: float = 0.0


@dataclass
class SqlProbe:
    kind: str                           # base | condition | diagnostic | solution
    sql: str
    probe_id: int = 0
    parent_id: int | None = None
    condition_index: int | None = None
    condition_candidate: dict | None = None   # {entity, column, value}
    description: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "sql": self.sql, "probe_id": self.probe_id,
            "parent_id": self.parent_id, "condition_index": self.condition_index,
            "condition_candidate": self.condition_candidate,
            "description": self.description,
        }


@dataclass
class ConditionSet:
    """Candidate columns and values for one condition entity."""
    entity: str
    columns: list[tuple[str, str]] = field(default_factory=list)
    values: list[str] = field(default_factory=list)
    value_scores: dict[str, float] = field(default_factory=dict)

    def ordered_values(self) -> list[str]:
        return sorted(self.values,
                      key=lambda v: (-self.value_scores.get(v, 0.0), self.values.index(v)))


@dataclass
class CandidateSets:
    target_groups: list[list[tuple[str, str]]] = field(default_factory=list)
    conditions: list[ConditionSet] = field(default_factory=list)


@dataclass
class ProbeResult:
    probe: SqlProbe
    outcome: ExecutionOutcome

    def to_dict(self) -> dict:
        return {"probe": self.probe.to_dict(), "outcome": self.outcome.to_dict()}


@dataclass
class Combination:
    picks: list[dict]                   # one {entity, column, value} per condition
    suitable: bool = False
    row_count: int = 0


@dataclass
class ExplorationReport:
    base_results: list[ProbeResult] = field(default_factory=list)
    condition_results: list[ProbeResult] = field(default_factory=list)
    combination_results: list[ProbeResult] = field(default_factory=list)
    survivors: dict[int, list[dict]] = field(default_factory=dict)
    unresolved_conditions: list[int] = field(default_factory=list)
    combinations: list[Combination] = field(default_factory=list)
    no_suitable_combination: bool = False
    flags: list[str] = field(default_factory=list)
    summary_text: str = ""
    plan_prompt: str = ""               # exploration-phase prompt/completion,
    plan_completion: str = ""           # kept verbatim for trajectory export

    def digest(self) -> str:
        """Prompt-ready text; every line reports a probe that really ran."""
        lines: list[str] = []
        if self.base_results:
            lines.append("Target probes:")
            lines.extend(_probe_line(r) for r in self.base_results)
        if self.condition_results:
            lines.append("Single-condition probes:")
            lines.extend(_probe_line(r) for r in self.condition_results)
        if self.combination_results:
            lines.append("Combined-condition probes (suitable first):")
            ordered = sorted(self.combination_results,
                             key=lambda r: r.outcome.status != Status.ROWS)
            lines.extend(_probe_line(r) for r in ordered)
        if self.no_suitable_combination:
            lines.append("NOTE: no combination of conditions returned rows.")
        if self.summary_text:
            lines.append("Summary: " + self.summary_text.strip())
        return "\n".join(lines) if lines else "(no probes executed)"


def _probe_line(result: ProbeResult) -> str:
    outcome = result.outcome
    if outcome.status == Status.ROWS:
        first = outcome.first_row() or ()
        cells = ", ".join(str(v)[:40] for v in list(first)[:5])
        return f"{result.probe.sql} -> {outcome.row_count} rows | first: ({cells})"
    if outcome.status == Status.EMPTY:
        return f"{result.probe.sql} -> (no rows)"
    message = (outcome.error_message or outcome.status.value).splitlines()[0]
    return f"{result.probe.sql} -> error: {message}"


# --- candidate assembly ---

def _resolve_group(columns: list[str], catalog: DatabaseCatalog) -> list[tuple[str, str]]:
    resolved = []
    for name in columns:
        hit = catalog.resolve_column(name)
        if hit is not None and hit not in resolved:
            resolved.append(hit)
    return resolved


def candidates_from_plan(plan: ExplorationPlan, catalog: DatabaseCatalog,
                         entities: list[Entity]) -> CandidateSets:
    """Validate a model-proposed plan against the catalog.

    Unresolvable columns are dropped; condition values keep their value-match
    scores (when known) so budget truncation prefers stronger matches.
    """
    score_by_value: dict[str, float] = {}
    for entity in entities:
        for match in entity.value_matches:
            existing = score_by_value.get(match.stored_value, 0.0)
            score_by_value[match.stored_value] = max(existing, match.combined)

    sets = CandidateSets()
    for group in plan.target_groups:
        resolved = _resolve_group(group, catalog)
        by_table: dict[str, list[tuple[str, str]]] = {}
        for table, column in resolved:
            by_table.setdefault(table, []).append((table, column))
        for table in sorted(by_table):
            if by_table[table] not in sets.target_groups:
                sets.target_groups.append(by_table[table])
    for cand in plan.conditions:
        resolved = _resolve_group(cand.columns, catalog)
        if not resolved:
            continue
        values = list(dict.fromkeys(cand.values))
        sets.conditions.append(ConditionSet(
            entity=cand.entity, columns=resolved, values=values,
            value_scores={v: score_by_value.get(v, 0.0) for v in values}))
    return sets


def fallback_candidates(entities: list[Entity]) -> CandidateSets:
    """Plan used when the exploration call cannot be parsed.

    One base probe per linked target column; one condition set per entity
    that carries value matches.
    """
    sets = CandidateSets()
    for entity in entities:
        if entity.value_matches:
            columns = list(dict.fromkeys((m.table, m.column) for m in entity.value_matches))
            values = list(dict.fromkeys(m.stored_value for m in entity.value_matches))
            scores = {m.stored_value: m.combined for m in entity.value_matches}
            sets.conditions.append(ConditionSet(entity=entity.surface, columns=columns,
                                                values=values, value_scores=scores))
        else:
            for pair in entity.column_candidates:
                if [pair] not in sets.target_groups:
                    sets.target_groups.append([pair])
    return sets


def propose_candidates(question: str, evidence: str, schema_text: str,
                       entities: list[Entity], client: LlmClient,
                       config: ExplorerConfig,
                       ) -> tuple[ExplorationPlan | None, str, str, bool]:
    """Stage-1 LLM call; returns (plan, prompt, completion, used_fallback)."""
    entity_lines = "\n".join(f"- {e.surface}" for e in entities) or "(none)"
    match_lines = []
    for entity in entities:
        for m in entity.value_matches:
            match_lines.append(
                f"- '{entity.surface}' ~ {m.table}.{m.column} = '{m.stored_value}'")
    request = LlmRequest(
        template_id="candidates_exploration",
        bindings={
            "question": question,
            "evidence": evidence or "",
            "schema": schema_text,
            "entities": entity_lines,
            "value_matches": "\n".join(match_lines) or "(none)",
        },
        sampling=SamplingParams(temperature=config.temperature))
    plan, completion, used_fallback = ask_structured(
        client, request, "exploration_plan", fallback=None)
    return plan, request.prompt(), completion, used_fallback


def generate_base_probes(sets: CandidateSets, config: ExplorerConfig) -> list[SqlProbe]:
    """One unconditioned probe per target column group, within budget."""
    if not sets.target_groups:
        raise EscalateToFullSchema("no target column candidates")
    probes: list[SqlProbe] = []
    for group in sets.target_groups[:config.max_base_probes]:
        table = group[0][0]
        cols = ", ".join(quote_ident(c) for _, c in group)
        sql = f"SELECT {cols} FROM {quote_ident(table)}"
        probes.append(SqlProbe(kind="base", sql=sql, probe_id=len(probes),
                               description=f"targets: {', '.join(f'{t}.{c}' for t, c in group)}"))
    return probes


def _probe_with_condition(base_sql: str, catalog: DatabaseCatalog,
                          column: tuple[str, str], value: str | None) -> str:
    table, col = column
    ast = parse(base_sql)
    scoped = ensure_table_in_scope(ast, table, join_on=_fk_edge(ast, catalog, table))
    if value is None:
        cond = ProbeCondition(column=f"{table}.{col}", operator="IS NOT NULL")
    else:
        cond = ProbeCondition(column=f"{table}.{col}", operator="=", value=value)
    return build_probe_sql(scoped, cond)


def _fk_edge(ast: Select, catalog: DatabaseCatalog,
             new_table: str) -> tuple[str, str, str, str] | None:
    """Foreign-key join condition between FROM tables and `new_table`, if any."""
    from .sqlkit import TableRef, iter_sources

    in_scope = [src.name for src in iter_sources(ast.core) if isinstance(src, TableRef)]
    for table in catalog.tables:
        for fk in table.foreign_keys:
            if fk.table == new_table and fk.ref_table in in_scope:
                return (fk.table, fk.column, fk.ref_table, fk.ref_column)
            if fk.ref_table == new_table and fk.table in in_scope:
                return (fk.table, fk.column, fk.ref_table, fk.ref_column)
    return None


def expand_condition_probes(bases: list[SqlProbe], condition: ConditionSet,
                            condition_index: int, catalog: DatabaseCatalog,
                            config: ExplorerConfig,
                            id_offset: int = 0) -> tuple[list[SqlProbe], bool]:
    """Cross product bases x columns x values for one condition.

    Exactly |bases| * |columns| * max(1, |values|) probes before the budget
    cap; truncation keeps the deterministic enumeration order with
    higher-scored values first. Returns (probes, truncated).
    """
    values: list[str | None] = list(condition.ordered_values()) or [None]
    combos = list(itertools.product(bases, condition.columns, values))
    truncated = len(combos) > config.max_condition_probes
    probes: list[SqlProbe] = []
    for base, column, value in combos[:config.max_condition_probes]:
        sql = _probe_with_condition(base.sql, catalog, column, value)
        desc_value = f" = '{value}'" if value is not None else " IS NOT NULL"
        probes.append(SqlProbe(
            kind="condition", sql=sql, probe_id=id_offset + len(probes),
            parent_id=base.probe_id, condition_index=condition_index,
            condition_candidate={"entity": condition.entity,
                                 "column": f"{column[0]}.{column[1]}",
                                 "value": value},
            description=f"{condition.entity}: {column[0]}.{column[1]}{desc_value}"))
    return probes, truncated


def run_probes(probes: list[SqlProbe], db: Database,
               limits: Limits) -> list[ProbeResult]:
    """Execute every probe once, preserving order; errors are data."""
    return [ProbeResult(probe=p, outcome=db.execute(p.sql, limits)) for p in probes]


def stage1_survivors(report: ExplorationReport,
                     conditions: list[ConditionSet]) -> None:
    """A candidate survives when any of its probes returned rows.

    When every candidate of a condition came back empty they are all kept
    and the condition is flagged unresolved, so later stages can still
    reason about it.
    """
    by_condition: dict[int, dict[tuple[str, str | None], bool]] = {}
    for result in report.condition_results:
        probe = result.probe
        cand = probe.condition_candidate or {}
        key = (cand.get("column"), cand.get("value"))
        bucket = by_condition.setdefault(probe.condition_index, {})
        bucket[key] = bucket.get(key, False) or result.outcome.status == Status.ROWS
    for index in range(len(conditions)):
        bucket = by_condition.get(index, {})
        alive = [{"entity": conditions[index].entity, "column": col, "value": val}
                 for (col, val), ok in bucket.items() if ok]
        if bucket and not alive:
            alive = [{"entity": conditions[index].entity, "column": col, "value": val}
                     for (col, val) in bucket.keys()]
            report.unresolved_conditions.append(index)
        report.survivors[index] = alive


def explore_combinations(report: ExplorationReport, bases: list[SqlProbe],
                         conditions: list[ConditionSet], catalog: DatabaseCatalog,
                         db: Database, limits: Limits,
                         config: ExplorerConfig) -> None:
    """Stage 2: execute the cross product of surviving candidates.

    A combination whose probe returns zero rows is marked unsuitable; that
    is the only reason a combination is ever marked unsuitable.
    """
    pools = [report.survivors.get(i, []) for i in range(len(conditions))]
    pools = [pool for pool in pools if pool]
    if not pools or not bases:
        return
    combos = list(itertools.product(*pools))
    if len(combos) > config.max_combination_probes:
        report.flags.append("combination_budget_exceeded")
        combos = combos[:config.max_combination_probes]
    base = bases[0]
    offset = len(report.base_results) + len(report.condition_results)
    for picks in combos:
        sql = base.sql
        for pick in picks:
            table, col = pick["column"].split(".", 1)
            sql = _probe_with_condition(sql, catalog, (table, col), pick["value"])
        probe = SqlProbe(kind="condition", sql=sql,
                         probe_id=offset + len(report.combination_results),
                         parent_id=base.probe_id,
                         description="combination: " + "; ".join(
                             f"{p['column']}={p['value']!r}" for p in picks))
        outcome = db.execute(sql, limits)
        report.combination_results.append(ProbeResult(probe=probe, outcome=outcome))
        report.combinations.append(Combination(
            picks=list(picks), suitable=outcome.status == Status.ROWS,
            row_count=outcome.row_count))
    if report.combinations and not any(c.suitable for c in report.combinations):
        report.no_suitable_combination = True


def summarize_findings(report: ExplorationReport, question: str,
                       client: LlmClient, config: ExplorerConfig) -> None:
    """Stage-2 summary call; the digest carries the text when it parses."""
    stage1 = "\n".join(_probe_line(r) for r in report.condition_results) or "(none)"
    stage2 = "\n".join(_probe_line(r) for r in report.combination_results) or "(none)"
    request = LlmRequest(
        template_id="combinations_exploration",
        bindings={"question": question, "stage1_digest": stage1,
                  "combination_digest": stage2},
        sampling=SamplingParams(temperature=config.temperature))
    response = client.complete(request)
    report.summary_text = response.text.strip()


def explore(question: str, evidence: str, schema_text: str,
            entities: list[Entity], catalog: DatabaseCatalog, db: Database,
            client: LlmClient, limits: Limits,
            config: ExplorerConfig | None = None) -> ExplorationReport:
    """Run both exploration stages and assemble the report."""
    config = config or ExplorerConfig()
    plan, prompt, completion, used_fallback = propose_candidates(
        question, evidence, schema_text, entities, client, config)
    if used_fallback or plan is None:
        sets = fallback_candidates(entities)
    else:
        sets = candidates_from_plan(plan, catalog, entities)
        if not sets.target_groups:
            sets.target_groups = fallback_candidates(entities).target_groups
    report = ExplorationReport()
    report.plan_prompt = prompt
    report.plan_completion = completion
    if used_fallback:
        report.flags.append("exploration_plan_fallback")

    bases = generate_base_probes(sets, config)
    report.base_results = run_probes(bases, db, limits)

    offset = len(bases)
    for index, condition in enumerate(sets.conditions):
        probes, truncated = expand_condition_probes(
            bases, condition, index, catalog, config, id_offset=offset)
        offset += len(probes)
        if truncated:
            report.flags.append(f"condition_{index}_budget_exceeded")
        report.condition_results.extend(run_probes(probes, db, limits))
    stage1_survivors(report, sets.conditions)

    explore_combinations(report, bases, sets.conditions, catalog, db, limits, config)
    summarize_findings(report, question, client, config)
    return report
