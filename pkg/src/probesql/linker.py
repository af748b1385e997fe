"""Entity-based schema linking: extraction, value retrieval, soft selection."""

from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import DatabaseCatalog, ValueIndex, jaccard
from .errors import ParseFailure
from .executor import Database
from .llm import LlmClient, LlmRequest, SamplingParams, ask_structured


@dataclass(frozen=True)
class LinkerConfig:
    lexical_weight: float = 0.5
    semantic_weight: float = 0.5
    score_threshold: float = 0.6
    top_k: int = 5
    temperature: float = 0.0


@dataclass
class ValueMatch:
    table: str
    column: str
    stored_value: str
    lexical_score: float
    semantic_score: float
    combined: float


@dataclass
class Entity:
    surface: str
    value_matches: list[ValueMatch] = field(default_factory=list)
    column_candidates: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class SchemaSelection:
    selected: set[tuple[str, str]] = field(default_factory=set)
    provenance: dict[str, list[tuple[str, str]]] = field(default_factory=dict)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def edit_similarity(a: str, b: str) -> float:
    """1 - normalized edit distance over lowercased strings."""
    a, b = a.lower().strip(), b.lower().strip()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def combined_score(lexical: float, semantic: float, config: LinkerConfig) -> float:
    return config.lexical_weight * lexical + config.semantic_weight * semantic


def extract_entities(question: str, evidence: str, client: LlmClient,
                     config: LinkerConfig | None = None) -> list[Entity]:
    """Ask the model for entity phrases; duplicates merge case-insensitively.

    Falls back to an empty list after a failed retry, in which case the
    pipeline links against the full schema.
    """
    config = config or LinkerConfig()
    request = LlmRequest(
        template_id="entity_extraction",
        bindings={"question": question, "evidence": evidence or ""},
        sampling=SamplingParams(temperature=config.temperature))
    surfaces, _, _ = ask_structured(client, request, "entity_list", fallback=[])
    return [Entity(surface=s) for s in (surfaces or [])]


def retrieve_values(entity: Entity, index: ValueIndex,
                    config: LinkerConfig | None = None) -> list[ValueMatch]:
    """Scored stored-value matches for one entity, best first.

    Every returned match is confirmed present in its column by an equality
    query before use; candidates below the combined-score threshold drop.
    """
    config = config or LinkerConfig()
    candidates = index.lookup(entity.surface)
    if not candidates:
        return []
    scored: list[ValueMatch] = []
    for table, column, value in candidates:
        lexical = jaccard(entity.surface, value, index.config.shingle_size)
        semantic = edit_similarity(entity.surface, value)
        score = combined_score(lexical, semantic, config)
        if score < config.score_threshold:
            continue
        scored.append(ValueMatch(table=table, column=column, stored_value=value,
                                 lexical_score=lexical, semantic_score=semantic,
                                 combined=score))
    scored.sort(key=lambda m: (-m.combined, m.table, m.column, m.stored_value))
    verified: list[ValueMatch] = []
    with Database(index.db_path) as db:
        conn = db.connection()
        for match in scored[:config.top_k]:
            tq = match.table.replace('"', '""')
            cq = match.column.replace('"', '""')
            row = conn.execute(f'SELECT 1 FROM "{tq}" WHERE "{cq}" = ? LIMIT 1',
                               (match.stored_value,)).fetchone()
            if row is not None:
                verified.append(match)
    return verified


def _matches_digest(matches: list[ValueMatch]) -> str:
    if not matches:
        return "(none)"
    return "\n".join(
        f"- {m.table}.{m.column} = '{m.stored_value}' (similarity {m.combined:.2f})"
        for m in matches)


def select_columns(entity: Entity, catalog: DatabaseCatalog, client: LlmClient,
                   question: str, schema_text: str,
                   config: LinkerConfig | None = None) -> list[tuple[str, str]]:
    """Columns relevant to one entity, validated against the catalog.

    Parse failure falls back to the columns hosting the entity's value
    matches.
    """
    config = config or LinkerConfig()
    request = LlmRequest(
        template_id="column_selection",
        bindings={
            "entity": entity.surface,
            "question": question,
            "schema": schema_text,
            "matches": _matches_digest(entity.value_matches),
        },
        sampling=SamplingParams(temperature=config.temperature))
    names, _, used_fallback = ask_structured(client, request, "column_list", fallback=None)
    if used_fallback or names is None:
        resolved = [(m.table, m.column) for m in entity.value_matches]
    else:
        resolved = []
        for name in names:
            hit = catalog.resolve_column(name)
            if hit is not None:
                resolved.append(hit)
    deduped: list[tuple[str, str]] = []
    for pair in resolved:
        if pair not in deduped:
            deduped.append(pair)
    return deduped


def link_schema(question: str, evidence: str, catalog: DatabaseCatalog,
                index: ValueIndex, client: LlmClient,
                config: LinkerConfig | None = None) -> tuple[list[Entity], SchemaSelection]:
    """Full linking pass: entities, value retrieval, per-entity column sets."""
    config = config or LinkerConfig()
    entities = extract_entities(question, evidence, client, config)
    overview = render_schema(catalog, None)
    selection = SchemaSelection()
    for entity in entities:
        entity.value_matches = retrieve_values(entity, index, config)
        columns = select_columns(entity, catalog, client, question, overview, config)
        entity.column_candidates = columns
        selection.provenance[entity.surface] = columns
        selection.selected.update(columns)
    return entities, selection


def render_schema(catalog: DatabaseCatalog, selection: SchemaSelection | None) -> str:
    """Schema text with tiered detail.

    Selected columns carry type, description, value examples, and value
    description; unselected ones appear as name and type only. No table or
    column is ever omitted. `selection=None` renders everything in full.
    """
    selected: set[tuple[str, str]] | None
    if selection is None:
        selected = None
    else:
        selected = {(t.lower(), c.lower()) for t, c in selection.selected}
    lines: list[str] = []
    for table in catalog.tables:
        lines.append(f"Table {table.name}:")
        for column in table.columns:
            header = f"  {column.name} ({column.type or 'ANY'})"
            if column.is_primary_key:
                header += " [primary key]"
            full = selected is None or (table.name.lower(), column.name.lower()) in selected
            if not full:
                lines.append(header)
                continue
            desc = catalog.description(table.name, column.name)
            if desc.column_description:
                header += f": {desc.column_description}"
            lines.append(header)
            if desc.value_examples:
                shown = ", ".join(repr(v) for v in desc.value_examples[:5])
                lines.append(f"    examples: {shown}")
            if desc.value_description:
                lines.append(f"    values: {desc.value_description}")
        for fk in table.foreign_keys:
            lines.append(f"  foreign key: {fk.table}.{fk.column} -> "
                         f"{fk.ref_table}.{fk.ref_column}")
    return "\n".join(lines)
