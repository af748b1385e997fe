"""Extraction of fine-tuning samples from gold-matching trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .evaluate import EvalReport
from .pipeline import Trajectory

PHASES = ("exploration", "prediction")


@dataclass
class SftSample:
    phase: str
    prompt: str
    completion: str
    question_id: str

    def to_dict(self) -> dict:
        return {"phase": self.phase, "prompt": self.prompt,
                "completion": self.completion, "question_id": self.question_id}


def extract_samples(trajectories: list[Trajectory],
                    report: EvalReport) -> list[SftSample]:
    """Two samples per correct trajectory: the probe-proposal exchange and
    the final-SQL exchange, both verbatim as the model saw/emitted them."""
    correct_ids = {v.question_id for v in report.verdicts
                   if v.evaluable and v.correct}
    samples: list[SftSample] = []
    for trajectory in sorted(trajectories, key=lambda t: t.question_id):
        if trajectory.question_id not in correct_ids:
            continue
        exploration = trajectory.stages.get("exploration_candidates", {})
        generation = trajectory.stages.get("generation", {})
        if exploration.get("prompt") and exploration.get("completion"):
            samples.append(SftSample(
                phase="exploration",
                prompt=exploration["prompt"],
                completion=exploration["completion"],
                question_id=trajectory.question_id))
        if generation.get("prompt") and generation.get("chosen_completion"):
            samples.append(SftSample(
                phase="prediction",
                prompt=generation["prompt"],
                completion=generation["chosen_completion"],
                question_id=trajectory.question_id))
    return samples


def export_sft(trajectories: list[Trajectory], report: EvalReport,
               out_path: str | Path) -> int:
    """Write JSON-lines samples; returns the number written."""
    samples = extract_samples(trajectories, report)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_dict(), ensure_ascii=False) + "\n")
    return len(samples)
