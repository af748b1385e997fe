"""Named ablation configurations and the matrix runner."""

from __future__ import annotations

import copy
from dataclasses import dataclass

from ..catalog import Dataset
from ..llm import LlmClient
from .evaluate import EvalReport, evaluate
from .pipeline import PipelineConfig, Trajectory, WorldContext, run_pipeline
from .runner import run_batch

# Row order mirrors the benchmark ablation table: the full pipeline followed
# by one row per disabled component.
NAMED_ROWS: dict[str, frozenset[str]] = {
    "full": frozenset(),
    "no-soft-linker": frozenset({"soft-linker"}),
    "no-gen-exploration": frozenset({"gen-exploration"}),
    "no-refinement": frozenset({"refinement"}),
    "no-refine-exploration": frozenset({"refine-exploration"}),
    "no-target-check": frozenset({"target-check"}),
}

# selectable explicitly, not part of `--rows all`
EXTRA_ROWS: dict[str, frozenset[str]] = {
    "no-exploration-anywhere": frozenset({"gen-exploration", "refine-exploration"}),
}


def resolve_rows(spec: str) -> list[tuple[str, frozenset[str]]]:
    if spec == "all":
        return list(NAMED_ROWS.items())
    rows = []
    for name in (part.strip() for part in spec.split(",") if part.strip()):
        flags = NAMED_ROWS.get(name, EXTRA_ROWS.get(name))
        if flags is None:
            raise ValueError(f"unknown ablation row {name!r}; known rows: "
                             f"{', '.join([*NAMED_ROWS, *EXTRA_ROWS])}")
        rows.append((name, flags))
    return rows


def ablate(dataset: Dataset, client_factory, base_config: PipelineConfig,
           rows: str = "all", workers: int = 1, order_sensitive: bool = False,
           ) -> tuple[list[EvalReport], dict[str, list[Trajectory]]]:
    """One full pipeline run per configuration row.

    `client_factory(row_name) -> LlmClient` so each row can have its own
    call log (disabled stages must show zero calls with their template ids).
    """
    reports: list[EvalReport] = []
    trajectories_by_row: dict[str, list[Trajectory]] = {}
    for name, flags in resolve_rows(rows):
        config = copy.deepcopy(base_config)
        config.disabled = set(flags)
        client = client_factory(name)
        world = WorldContext(dataset, example_cap=config.example_cap)
        trajectories = run_batch(dataset.questions, world, client, config,
                                 workers=workers)
        report = evaluate(trajectories, dataset.questions, dataset,
                          order_sensitive=order_sensitive, label=name,
                          config_snapshot=config.snapshot())
        reports.append(report)
        trajectories_by_row[name] = trajectories
    return reports, trajectories_by_row
