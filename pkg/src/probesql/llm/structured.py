"""Tolerant extraction of structured values from model completions."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..errors import ParseFailure
from .client import LlmClient, LlmRequest
from .templates import RETRY_SLOT

CAUSE_TAGS = (
    "condition_conflict",
    "condition_duplication",
    "unnecessary_table_joins",
    "column_value_mismatch",
    "subquery_scope_inconsistency",
)

_FENCED_SQL = re.compile(r"```sql\s*(.*?)```", re.DOTALL | re.IGNORECASE)
_FENCED_ANY = re.compile(r"```[a-zA-Z]*\s*(.*?)```", re.DOTALL)
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*(.+?)\s*$")
_JSON_ARRAY = re.compile(r"\[.*?\]", re.DOTALL)
_REMOVE = re.compile(r"\bREMOVE\b\s*:?\s*\[?([0-9,\s]+)\]?", re.IGNORECASE)
_KEEP = re.compile(r"\bKEEP\b(\s+ALL)?|\bNONE\b", re.IGNORECASE)


def extract_sql_blocks(completion: str) -> list[str]:
    blocks = [b.strip().rstrip(";").strip() for b in _FENCED_SQL.findall(completion)]
    if not blocks:
        blocks = [b.strip().rstrip(";").strip() for b in _FENCED_ANY.findall(completion)
                  if re.match(r"\s*(SELECT|WITH)\b", b, re.IGNORECASE)]
    if not blocks:
        # bare statements: from a SELECT/WITH opener to end of line-block
        for match in re.finditer(r"^\s*((?:SELECT|WITH)\b.*?)(?:;|\n\s*\n|\Z)",
                                 completion, re.DOTALL | re.IGNORECASE | re.MULTILINE):
            blocks.append(" ".join(match.group(1).split()))
    return [b for b in blocks if b]


def _string_items(completion: str) -> list[str]:
    for candidate in _JSON_ARRAY.findall(completion):
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(data, list) and all(isinstance(x, str) for x in data):
            return [x.strip() for x in data if x.strip()]
    items = []
    for line in completion.splitlines():
        match = _BULLET.match(line)
        if match:
            items.append(match.group(1).strip().strip('"').strip("'"))
    if not items:
        items = [m.group(1) for m in re.finditer(r'"([^"]+)"', completion)]
    return [x for x in items if x]


def _dedupe(items: list[str]) -> list[str]:
    seen: set[str] = set()
    result = []
    for item in items:
        key = item.lower()
        if key not in seen:
            seen.add(key)
            result.append(item)
    return result


def parse_entity_list(completion: str) -> list[str]:
    items = _dedupe(_string_items(completion))
    if not items:
        raise ParseFailure(completion, "no entity list found")
    return items


def parse_column_list(completion: str) -> list[str]:
    items = []
    for raw in _string_items(completion):
        cleaned = raw.strip().strip(",").strip("`").strip('"')
        if re.fullmatch(r'[\w."` ]+\.[\w"` ]+', cleaned) or re.fullmatch(r"[\w]+", cleaned):
            items.append(cleaned)
    if not items:
        raise ParseFailure(completion, "no column list found")
    return _dedupe(items)


def parse_keep_remove(completion: str, n_items: int) -> set[int]:
    """Remove-set verdict; anything unparseable or out of range keeps all."""
    match = _REMOVE.search(completion)
    if match:
        indices = {int(x) for x in re.findall(r"\d+", match.group(1))}
        if indices and all(0 <= i < n_items for i in indices) and len(indices) < n_items:
            return indices
        raise ParseFailure(completion, "remove-set is not a valid strict subset")
    if _KEEP.search(completion):
        return set()
    raise ParseFailure(completion, "no KEEP/REMOVE verdict found")


_CAUSE_HINTS = (
    ("condition_conflict", ("conflict",)),
    ("condition_duplication", ("duplicat", "redundan")),
    ("unnecessary_table_joins", ("join",)),
    ("column_value_mismatch", ("mismatch", "format", "wrong column", "wrong value")),
    ("subquery_scope_inconsistency", ("subquery", "sub-query", "scope")),
)


def classify_cause(text: str) -> str | None:
    """Map free-form cause wording onto the closed five-cause set."""
    lowered = text.lower().replace("-", "_").replace(" ", "_")
    for tag in CAUSE_TAGS:
        if tag in lowered:
            return tag
    lowered = text.lower()
    for tag, hints in _CAUSE_HINTS:
        if any(hint in lowered for hint in hints):
            return tag
    return None


def parse_cause_list(completion: str) -> list[tuple[str, str]]:
    """`CAUSE: name | rationale` lines -> (tag, verbatim rationale) pairs."""
    causes: list[tuple[str, str]] = []
    for line in completion.splitlines():
        stripped = line.strip().lstrip("-* ").strip()
        if not stripped:
            continue
        match = re.match(r"CAUSE\s*:?\s*(.+)", stripped, re.IGNORECASE)
        if not match:
            continue
        rest = match.group(1).strip()
        name, _, rationale = rest.partition("|")
        tag = classify_cause(name) or classify_cause(rest)
        if tag:
            causes.append((tag, rationale.strip() or rest.strip()))
    if not causes:
        # whole-text fallback: any recognizable cause wording
        tag = classify_cause(completion)
        if tag:
            causes.append((tag, completion.strip()[:200]))
    if not causes:
        raise ParseFailure(completion, "no recognizable cause hypothesis")
    return causes[:3]


@dataclass
class ConditionCandidates:
    entity: str
    columns: list[str] = field(default_factory=list)   # "table.column"
    values: list[str] = field(default_factory=list)


@dataclass
class ExplorationPlan:
    target_groups: list[list[str]] = field(default_factory=list)
    conditions: list[ConditionCandidates] = field(default_factory=list)


def _split_quoted_values(text: str) -> list[str]:
    values = [m.group(1) for m in re.finditer(r"'((?:[^']|'')*)'", text)]
    if values:
        return [v.replace("''", "'") for v in values]
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_exploration_plan(completion: str) -> ExplorationPlan:
    """TARGETS/CONDITIONS layout produced by the candidates-exploration stage."""
    plan = ExplorationPlan()
    section = None
    for line in completion.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if re.match(r"TARGETS?\s*:?\s*$", stripped, re.IGNORECASE):
            section = "targets"
            continue
        if re.match(r"CONDITIONS?\s*:?\s*$", stripped, re.IGNORECASE):
            section = "conditions"
            continue
        bullet = _BULLET.match(line)
        content = bullet.group(1).strip() if bullet else stripped
        if section == "targets":
            columns = [c.strip().strip("`\"") for c in content.split(",") if c.strip()]
            columns = [c for c in columns if re.fullmatch(r'[\w."` ]+', c)]
            if columns:
                plan.target_groups.append(columns)
        elif section == "conditions":
            parts = [p.strip() for p in content.split("|")]
            if not parts or not parts[0]:
                continue
            cand = ConditionCandidates(entity=parts[0])
            for part in parts[1:]:
                label, _, rest = part.partition(":")
                label = label.strip().lower()
                if label.startswith("column"):
                    cand.columns = [c.strip().strip("`\"") for c in rest.split(",")
                                    if c.strip()]
                elif label.startswith("value"):
                    cand.values = _split_quoted_values(rest)
            if cand.columns:
                plan.conditions.append(cand)
    if not plan.target_groups:
        raise ParseFailure(completion, "no TARGETS section found")
    return plan


_SHAPES = {
    "sql_blocks": lambda text: (extract_sql_blocks(text)
                                or (_ for _ in ()).throw(ParseFailure(text, "no SQL block found"))),
    "entity_list": parse_entity_list,
    "column_list": parse_column_list,
    "cause_list": parse_cause_list,
    "exploration_plan": parse_exploration_plan,
}


def parse_structured(completion: str, shape: str, **kwargs):
    """Parse one completion according to an expected shape.

    Raises ParseFailure (carrying the raw text) when the completion does not
    contain the shape.
    """
    if not completion or not completion.strip():
        raise ParseFailure(completion or "", "empty completion")
    if shape == "keep_remove":
        return parse_keep_remove(completion, kwargs["n_items"])
    parser = _SHAPES.get(shape)
    if parser is None:
        raise ValueError(f"unknown shape {shape!r}")
    return parser(completion)


FORMAT_REMINDER = ("\n\nYour previous reply could not be parsed. Follow the reply format "
                   "exactly as specified above, with no surrounding commentary.")


def ask_structured(client: LlmClient, request: LlmRequest, shape: str,
                   fallback=None, **kwargs):
    """complete + parse with one format-reminder retry, then a fallback.

    Returns (value, completion_text, used_fallback).
    """
    response = client.complete(request)
    text = response.text
    try:
        return parse_structured(text, shape, **kwargs), text, False
    except ParseFailure:
        pass
    retry_bindings = dict(request.bindings)
    retry_bindings[RETRY_SLOT] = FORMAT_REMINDER
    retry = LlmRequest(template_id=request.template_id, bindings=retry_bindings,
                       sampling=request.sampling)
    response = client.complete(retry)
    text = response.text
    try:
        return parse_structured(text, shape, **kwargs), text, False
    except ParseFailure:
        return fallback, text, True
