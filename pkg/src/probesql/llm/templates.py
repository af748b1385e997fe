"""Prompt template registry backed by packaged data files."""

from __future__ import annotations

import re
from importlib import resources
from string import Template

from ..errors import MissingBinding, UnknownTemplate

TEMPLATE_IDS = (
    "entity_extraction",
    "column_selection",
    "candidates_exploration",
    "combinations_exploration",
    "zero_shot_generation",
    "error_feedback_repair",
    "solution_exploration",
    "final_refinement",
    "target_checking",
)

# every template carries this optional slot so a parse-failure retry can
# append a format reminder without changing the template text
RETRY_SLOT = "format_note"

_cache: dict[str, str] = {}


def template_text(template_id: str) -> str:
    if template_id not in TEMPLATE_IDS:
        raise UnknownTemplate(f"unknown template id {template_id!r}")
    text = _cache.get(template_id)
    if text is None:
        text = (resources.files("probesql.templates")
                .joinpath(f"{template_id}.txt").read_text(encoding="utf-8"))
        _cache[template_id] = text
    return text


def placeholders(template_id: str) -> set[str]:
    """Names of all substitution slots in a template."""
    pattern = re.compile(Template.pattern)
    names = set()
    for match in pattern.finditer(template_text(template_id)):
        name = match.group("named") or match.group("braced")
        if name:
            names.add(name)
    return names


def render_prompt(template_id: str, bindings: dict[str, str]) -> str:
    """Deterministic substitution; an unbound placeholder is an error."""
    required = placeholders(template_id)
    values = dict(bindings)
    values.setdefault(RETRY_SLOT, "")
    for name in sorted(required):
        if name not in values:
            raise MissingBinding(name)
    return Template(template_text(template_id)).safe_substitute(values)


def verify_templates() -> None:
    """Startup check: every registered template id resolves to a file."""
    for template_id in TEMPLATE_IDS:
        template_text(template_id)
