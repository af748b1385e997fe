"""LLM client, prompt templates, cassette record/replay, structured parsing."""

from .cassette import Cassette, fingerprint
from .client import (
    CallableBackend, HttpBackend, LlmClient, LlmRequest, LlmResponse,
    SamplingParams, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
)
from .structured import (
    CAUSE_TAGS, ConditionCandidates, ExplorationPlan, ask_structured,
    classify_cause, extract_sql_blocks, parse_structured,
)
from .templates import (
    TEMPLATE_IDS, placeholders, render_prompt, template_text, verify_templates,
)
