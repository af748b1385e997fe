"""Execution-accuracy scoring of trajectories against gold SQL."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..catalog import Dataset, QuestionRecord
from ..executor import Database, Limits, Status, canonicalize, results_equal
from .pipeline import Trajectory

BUCKETS = ("simple", "moderate", "challenging", "unknown")

# Published benchmark figures for this workflow family, carried in reports
# as context only; this harness never reproduces them at desk scale.
REFERENCE_RESULTS = {
    "bird_dev_overall": 67.67,
    "bird_dev_by_difficulty": {"simple": 74.92, "moderate": 57.76, "challenging": 53.10},
    "bird_dev_finetuned": 68.19,
    "spider_dev": 87.5,
    "spider_test": 88.5,
}

EVAL_LIMITS = Limits(timeout_ms=30_000, max_rows=1_000_000)


@dataclass
class QuestionVerdict:
    question_id: str
    difficulty: str
    correct: bool
    evaluable: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {"question_id": self.question_id, "difficulty": self.difficulty,
                "correct": self.correct, "evaluable": self.evaluable,
                "detail": self.detail}


@dataclass
class EvalReport:
    verdicts: list[QuestionVerdict] = field(default_factory=list)
    unevaluable: int = 0
    config_snapshot: dict = field(default_factory=dict)
    label: str = "full"

    @property
    def total(self) -> int:
        return sum(1 for v in self.verdicts if v.evaluable)

    @property
    def correct(self) -> int:
        return sum(1 for v in self.verdicts if v.evaluable and v.correct)

    def bucket_counts(self, bucket: str) -> tuple[int, int]:
        members = [v for v in self.verdicts if v.evaluable and v.difficulty == bucket]
        return sum(1 for v in members if v.correct), len(members)

    def ex(self, bucket: str | None = None) -> float:
        """EX percent; 0.0 (flagged in the JSON) when the bucket is empty."""
        if bucket is None:
            correct, total = self.correct, self.total
        else:
            correct, total = self.bucket_counts(bucket)
        return 100.0 * correct / total if total else 0.0

    def to_dict(self) -> dict:
        buckets = {}
        for bucket in BUCKETS:
            correct, total = self.bucket_counts(bucket)
            if total:
                buckets[bucket] = {"correct": correct, "total": total,
                                   "ex": round(self.ex(bucket), 2)}
        return {
            "label": self.label,
            "overall": {"correct": self.correct, "total": self.total,
                        "ex": round(self.ex(), 2),
                        "undefined": self.total == 0},
            "buckets": buckets,
            "unevaluable": self.unevaluable,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "config": self.config_snapshot,
            "reference_results": REFERENCE_RESULTS,
        }

    def to_table(self) -> str:
        header = f"{'config':<28}{'Simple':>10}{'Moderate':>10}{'Chall.':>10}{'All':>10}"
        return "\n".join([header, self.table_row()])

    def table_row(self) -> str:
        cells = []
        for bucket in ("simple", "moderate", "challenging"):
            _, total = self.bucket_counts(bucket)
            cells.append(f"{self.ex(bucket):>10.2f}" if total else f"{'-':>10}")
        cells.append(f"{self.ex():>10.2f}")
        return f"{self.label:<28}" + "".join(cells)


def evaluate(trajectories: list[Trajectory], questions: list[QuestionRecord],
             dataset: Dataset, order_sensitive: bool = False,
             limits: Limits | None = None, label: str = "full",
             config_snapshot: dict | None = None) -> EvalReport:
    """Execute gold and predicted SQL and compare canonical result sets.

    Questions whose gold SQL is missing or fails to execute are excluded
    from the denominator and counted as unevaluable.
    """
    limits = limits or EVAL_LIMITS
    by_id = {t.question_id: t for t in trajectories}
    report = EvalReport(label=label, config_snapshot=config_snapshot or {})
    handles: dict[str, Database] = {}
    try:
        for question in sorted(questions, key=lambda q: q.id):
            trajectory = by_id.get(question.id)
            if trajectory is None:
                continue
            verdict = QuestionVerdict(question_id=question.id,
                                      difficulty=question.difficulty, correct=False)
            if not question.gold_sql:
                verdict.evaluable = False
                verdict.detail = "no gold SQL"
                report.unevaluable += 1
                report.verdicts.append(verdict)
                continue
            db = handles.get(question.db_id)
            if db is None:
                db = handles[question.db_id] = Database(dataset.db_path(question.db_id))
            gold = db.execute(question.gold_sql, limits)
            if not gold.ok:
                verdict.evaluable = False
                verdict.detail = f"gold execution {gold.status.value}"
                report.unevaluable += 1
                report.verdicts.append(verdict)
                continue
            if trajectory.error or not trajectory.final_sql:
                verdict.detail = trajectory.error or "no final SQL"
                report.verdicts.append(verdict)
                continue
            predicted = db.execute(trajectory.final_sql, limits)
            if not predicted.ok:
                verdict.detail = f"prediction {predicted.status.value}"
                report.verdicts.append(verdict)
                continue
            verdict.correct = results_equal(canonicalize(gold), canonicalize(predicted),
                                            order_sensitive=order_sensitive)
            report.verdicts.append(verdict)
    finally:
        for db in handles.values():
            db.close()
    return report


def combined_table(reports: list[EvalReport]) -> str:
    header = f"{'config':<28}{'Simple':>10}{'Moderate':>10}{'Chall.':>10}{'All':>10}"
    return "\n".join([header] + [r.table_row() for r in reports])


def write_report(report: EvalReport | list[EvalReport], path: str | Path) -> None:
    path = Path(path)
    if isinstance(report, list):
        payload = {"reports": [r.to_dict() for r in report],
                   "table": combined_table(report)}
    else:
        payload = report.to_dict()
        payload["table"] = report.to_table()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")
