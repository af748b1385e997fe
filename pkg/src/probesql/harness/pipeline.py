"""Per-question pipeline orchestration producing trajectories."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..catalog import (
    DatabaseCatalog, Dataset, QuestionRecord, ValueIndex, build_catalog,
    build_value_index,
)
from ..errors import AllUnparseable, EscalateToFullSchema, ProbeSqlError
from ..executor import Database, ExecutionOutcome, Limits, Status
from ..explorer import ExplorationReport, ExplorerConfig, explore
from ..generator import GeneratorConfig, generate_candidates, select_by_consistency
from ..linker import LinkerConfig, SchemaSelection, link_schema, render_schema
from ..llm import LlmClient
from ..refiner import (
    RefinementTrace, RefinerConfig, check_targets, refine_empty_result,
    repair_with_feedback, route,
)
from ..sqlkit import parse, quote_ident

STAGES = ("linking", "exploration_candidates", "exploration_combinations",
          "generation", "refinement", "target_check")

DISABLE_FLAGS = ("soft-linker", "gen-exploration", "refinement",
                 "refine-exploration", "target-check")


def validate_flags(disabled: set[str]) -> None:
    unknown = disabled - set(DISABLE_FLAGS)
    if unknown:
        raise ValueError(f"unknown disable flags: {sorted(unknown)}")
    if "refine-exploration" in disabled and "refinement" in disabled:
        raise ValueError("refine-exploration cannot be disabled together with "
                         "refinement (it is part of it)")


@dataclass
class PipelineConfig:
    consistency_n: int = 8
    generation_temperature: float = 0.8
    disabled: set[str] = field(default_factory=set)
    probe_limits: Limits = field(default_factory=lambda: Limits(timeout_ms=5_000, max_rows=500))
    question_budget_s: float = 120.0    # live mode wall clock per question
    enforce_budget: bool = False
    example_cap: int = 3

    def __post_init__(self):
        validate_flags(self.disabled)

    def enabled(self, flag: str) -> bool:
        return flag not in self.disabled

    def snapshot(self) -> dict:
        return {
            "consistency_n": self.consistency_n,
            "generation_temperature": self.generation_temperature,
            "disabled": sorted(self.disabled),
            "probe_timeout_ms": self.probe_limits.timeout_ms,
            "probe_max_rows": self.probe_limits.max_rows,
            "question_budget_s": self.question_budget_s,
        }


@dataclass
class Trajectory:
    question_id: str
    db_id: str
    question: str
    stages: dict[str, dict] = field(default_factory=dict)
    final_sql: str = ""
    final_outcome: ExecutionOutcome | None = None
    error: str = ""
    flags: list[str] = field(default_factory=list)
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "db_id": self.db_id,
            "question": self.question,
            "stages": self.stages,
            "final_sql": self.final_sql,
            "final_outcome": self.final_outcome.to_dict() if self.final_outcome else None,
            "error": self.error,
            "flags": self.flags,
            "elapsed_s": round(self.elapsed_s, 3),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        final = data.get("final_outcome")
        return cls(
            question_id=data["question_id"],
            db_id=data["db_id"],
            question=data.get("question", ""),
            stages=data.get("stages", {}),
            final_sql=data.get("final_sql", ""),
            final_outcome=ExecutionOutcome.from_dict(final) if final else None,
            error=data.get("error", ""),
            flags=data.get("flags", []),
            elapsed_s=data.get("elapsed_s", 0.0),
        )


class WorldContext:
    """Shared immutable-after-build catalogs and value indexes per database."""

    def __init__(self, dataset: Dataset, example_cap: int = 3):
        self.dataset = dataset
        self.example_cap = example_cap
        self._catalogs: dict[str, DatabaseCatalog] = {}
        self._indexes: dict[str, ValueIndex] = {}
        self._lock = threading.Lock()

    def catalog(self, db_id: str) -> DatabaseCatalog:
        with self._lock:
            if db_id not in self._catalogs:
                self._catalogs[db_id] = build_catalog(
                    self.dataset.db_path(db_id),
                    self.dataset.description_dir(db_id),
                    db_id=db_id, example_cap=self.example_cap)
            return self._catalogs[db_id]

    def index(self, db_id: str) -> ValueIndex:
        with self._lock:
            if db_id not in self._indexes:
                catalog = self._catalogs.get(db_id)
            else:
                return self._indexes[db_id]
        catalog = self.catalog(db_id)
        with self._lock:
            if db_id not in self._indexes:
                with Database(self.dataset.db_path(db_id)) as db:
                    self._indexes[db_id] = build_value_index(catalog, db)
            return self._indexes[db_id]


def _fallback_sql(catalog: DatabaseCatalog) -> str:
    """Last-resort query: select the first column of the first table."""
    for table in catalog.tables:
        if table.columns:
            return (f"SELECT {quote_ident(table.columns[0].name)} "
                    f"FROM {quote_ident(table.name)}")
    return "SELECT 1"


def run_pipeline(question: QuestionRecord, world: WorldContext,
                 client: LlmClient, config: PipelineConfig) -> Trajectory:
    """Run every enabled stage in order and log the full trajectory.

    Any failure turns into an error verdict on the trajectory; the batch
    never aborts because of one question.
    """
    trajectory = Trajectory(question_id=question.id, db_id=question.db_id,
                            question=question.text)
    started = time.perf_counter()
    deadline = started + config.question_budget_s if config.enforce_budget else None

    def out_of_budget() -> bool:
        if deadline is not None and time.perf_counter() > deadline:
            if "budget_truncated" not in trajectory.flags:
                trajectory.flags.append("budget_truncated")
            return True
        return False

    try:
        catalog = world.catalog(question.db_id)
        index = world.index(question.db_id)
        with Database(world.dataset.db_path(question.db_id)) as db:
            _run_stages(trajectory, question, catalog, index, db, client,
                        config, out_of_budget)
    except ProbeSqlError as exc:
        trajectory.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # pragma: no cover - unexpected bugs become verdicts
        trajectory.error = f"unexpected {type(exc).__name__}: {exc}"
    trajectory.elapsed_s = time.perf_counter() - started
    return trajectory


def _run_stages(trajectory: Trajectory, question: QuestionRecord,
                catalog: DatabaseCatalog, index: ValueIndex, db: Database,
                client: LlmClient, config: PipelineConfig, out_of_budget) -> None:
    limits = config.probe_limits
    linker_config = LinkerConfig()

    # --- schema linking ---
    if config.enabled("soft-linker"):
        entities, selection = link_schema(question.text, question.evidence,
                                          catalog, index, client, linker_config)
        schema_text = render_schema(catalog, selection)
        trajectory.stages["linking"] = {
            "entities": [
                {"surface": e.surface,
                 "matches": [[m.table, m.column, m.stored_value, round(m.combined, 4)]
                             for m in e.value_matches],
                 "columns": [f"{t}.{c}" for t, c in e.column_candidates]}
                for e in entities],
            "selected_columns": sorted(f"{t}.{c}" for t, c in selection.selected),
        }
    else:
        entities = []
        schema_text = render_schema(catalog, None)

    # --- exploration (two stages) ---
    report: ExplorationReport | None = None
    if config.enabled("gen-exploration") and not out_of_budget():
        explorer_config = ExplorerConfig()
        try:
            report = explore(question.text, question.evidence, schema_text,
                             entities, catalog, db, client, limits, explorer_config)
        except EscalateToFullSchema:
            schema_text = render_schema(catalog, None)
            try:
                report = explore(question.text, question.evidence, schema_text,
                                 entities, catalog, db, client, limits,
                                 explorer_config)
            except EscalateToFullSchema:
                report = None
        if report is not None:
            trajectory.stages["exploration_candidates"] = {
                "prompt": report.plan_prompt,
                "completion": report.plan_completion,
                "flags": report.flags,
                "base_probes": [r.to_dict() for r in report.base_results],
                "condition_probes": [r.to_dict() for r in report.condition_results],
                "survivors": {str(k): v for k, v in report.survivors.items()},
                "unresolved_conditions": report.unresolved_conditions,
            }
            trajectory.stages["exploration_combinations"] = {
                "combination_probes": [r.to_dict() for r in report.combination_results],
                "no_suitable_combination": report.no_suitable_combination,
                "summary": report.summary_text,
            }
        else:
            trajectory.stages["exploration_candidates"] = {
                "flags": ["escalated_no_candidates"], "base_probes": [],
                "condition_probes": [], "survivors": {},
            }
            trajectory.stages["exploration_combinations"] = {
                "combination_probes": [], "no_suitable_combination": False,
                "summary": "",
            }

    digest = report.digest() if report is not None else ""

    # --- generation with self-consistency ---
    generator_config = GeneratorConfig(n_samples=config.consistency_n,
                                       temperature=config.generation_temperature)
    try:
        candidates, gen_prompt, discarded = generate_candidates(
            question.text, question.evidence, schema_text, digest, db, client,
            limits, generator_config)
        chosen = select_by_consistency(candidates)
        generation_record = {
            "prompt": gen_prompt,
            "candidates": [{"sql": c.sql, "group_key": c.group_key,
                            "status": c.outcome.status.value,
                            "sample_index": c.sample_index} for c in candidates],
            "discarded": len(discarded),
            "chosen_sample_index": chosen.sample_index,
            "chosen_completion": chosen.completion,
        }
    except AllUnparseable:
        fallback = _fallback_sql(catalog)
        outcome = db.execute(fallback, limits)
        from ..generator import CandidateSql, group_key_for
        chosen = CandidateSql(sql=fallback, outcome=outcome,
                              group_key=group_key_for(outcome), sample_index=0)
        generation_record = {
            "prompt": "", "candidates": [], "discarded": config.consistency_n,
            "chosen_sample_index": 0, "chosen_completion": "",
            "flags": ["all_unparseable_fallback"],
        }
    trajectory.stages["generation"] = generation_record

    current_sql = chosen.sql
    current_outcome = chosen.outcome

    # --- refinement ---
    if config.enabled("refinement") and not out_of_budget():
        trace = RefinementTrace(route=route(current_outcome))
        refiner_config = RefinerConfig()
        if trace.route == "error_feedback":
            current_sql, current_outcome = repair_with_feedback(
                current_sql, current_outcome.error_message, schema_text,
                question.text, db, client, limits, refiner_config, trace)
        elif trace.route == "empty_result":
            current_sql, current_outcome = refine_empty_result(
                current_sql, question.text, schema_text, catalog, index, db,
                client, limits, refiner_config, trace,
                explore=config.enabled("refine-exploration"))
        record = trace.to_dict()
        record["output_sql"] = current_sql
        record["output_status"] = current_outcome.status.value
        trajectory.stages["refinement"] = record

        # --- target checking (part of refinement per the ablation layout) ---
        if config.enabled("target-check") and not out_of_budget():
            checked_sql, removed, flags = check_targets(
                current_sql, question.text, question.evidence, db, client,
                limits, refiner_config)
            if checked_sql != current_sql:
                current_sql = checked_sql
                current_outcome = db.execute(current_sql, limits)
            trajectory.stages["target_check"] = {
                "removed_indices": sorted(removed),
                "flags": flags,
                "output_sql": current_sql,
            }

    trajectory.final_sql = current_sql
    trajectory.final_outcome = current_outcome
