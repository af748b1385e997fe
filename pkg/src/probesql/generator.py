"""Zero-shot SQL generation with execution-result self-consistency."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AllUnparseable, ParseFailure
from .executor import Database, ExecutionOutcome, Limits, Status, canonicalize
from .llm import LlmClient, LlmRequest, SamplingParams, extract_sql_blocks
from .sqlkit import parse as parse_sql


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 8
    temperature: float = 0.8
    max_tokens: int = 1024


@dataclass
class CandidateSql:
    sql: str
    outcome: ExecutionOutcome
    group_key: str
    sample_index: int
    completion: str = ""


def group_key_for(outcome: ExecutionOutcome) -> str:
    """Deterministic equivalence key: canonical result for runnable SQL,
    error class otherwise."""
    if outcome.status == Status.ROWS:
        return f"rows:{canonicalize(outcome).digest()}:{outcome.row_count}"
    if outcome.status == Status.EMPTY:
        return "empty"
    if outcome.status == Status.TIMEOUT:
        return "timeout"
    first_line = (outcome.error_message or "error").splitlines()[0][:120]
    return f"error:{first_line}"


def generate_candidates(question: str, evidence: str, schema_text: str,
                        exploration_digest: str, db: Database,
                        client: LlmClient, limits: Limits,
                        config: GeneratorConfig | None = None,
                        ) -> tuple[list[CandidateSql], str, list[str]]:
    """Sample n completions, extract and execute the SQL from each.

    Returns (candidates, prompt, discarded completions). Completions with no
    extractable SQL are discarded without affecting the others; if all of
    them are unusable, AllUnparseable is raised for the caller's fallback.
    """
    config = config or GeneratorConfig()
    request = LlmRequest(
        template_id="zero_shot_generation",
        bindings={
            "schema": schema_text,
            "question": question,
            "evidence": evidence or "",
            "exploration_report": exploration_digest or "(exploration disabled)",
        },
        sampling=SamplingParams(temperature=config.temperature,
                                n_samples=config.n_samples,
                                max_tokens=config.max_tokens))
    response = client.complete(request)
    candidates: list[CandidateSql] = []
    discarded: list[str] = []
    for index, completion in enumerate(response.completions):
        blocks = extract_sql_blocks(completion)
        if not blocks:
            discarded.append(completion)
            continue
        sql = blocks[0]
        try:
            parse_sql(sql)
        except Exception:
            discarded.append(completion)
            continue
        outcome = db.execute(sql, limits)
        candidates.append(CandidateSql(
            sql=sql, outcome=outcome, group_key=group_key_for(outcome),
            sample_index=index, completion=completion))
    if not candidates:
        raise AllUnparseable(f"none of {len(response.completions)} completions "
                             "contained usable SQL")
    return candidates, request.prompt(), discarded


_STATUS_RANK = {Status.ROWS: 0, Status.EMPTY: 1, Status.ERROR: 2, Status.TIMEOUT: 2}


def select_by_consistency(candidates: list[CandidateSql]) -> CandidateSql:
    """Pick a member of the largest result-equivalent group.

    Groups of row-returning candidates outrank empty ones, which outrank
    errors; among eligible groups the largest wins and ties break toward
    the group containing the smallest sample index. The returned candidate
    is that group's earliest member.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    groups: dict[str, list[CandidateSql]] = {}
    for candidate in candidates:
        groups.setdefault(candidate.group_key, []).append(candidate)
    best_rank = min(_STATUS_RANK[c.outcome.status] for c in candidates)
    eligible = [members for members in groups.values()
                if _STATUS_RANK[members[0].outcome.status] == best_rank]
    eligible.sort(key=lambda members: (-len(members),
                                       min(c.sample_index for c in members)))
    winner = eligible[0]
    return min(winner, key=lambda c: c.sample_index)
