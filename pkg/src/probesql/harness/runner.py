"""Batch execution of the pipeline with optional question-level parallelism."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..catalog import QuestionRecord
from ..llm import LlmClient
from .pipeline import PipelineConfig, Trajectory, WorldContext, run_pipeline


def run_batch(questions: list[QuestionRecord], world: WorldContext,
              client: LlmClient, config: PipelineConfig,
              workers: int = 1) -> list[Trajectory]:
    """Run every question; results are sorted by question id so reports are
    deterministic regardless of worker scheduling."""
    if workers <= 1:
        trajectories = [run_pipeline(q, world, client, config) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajectories = list(pool.map(
                lambda q: run_pipeline(q, world, client, config), questions))
    return sorted(trajectories, key=lambda t: t.question_id)


def write_trajectories(trajectories: list[Trajectory], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for trajectory in trajectories:
            fh.write(json.dumps(trajectory.to_dict(), ensure_ascii=False) + "\n")


def read_trajectories(path: str | Path) -> list[Trajectory]:
    trajectories = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                trajectories.append(Trajectory.from_dict(json.loads(line)))
    return trajectories
