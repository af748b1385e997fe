"""Loading of BIRD/Spider-shaped question files and database layouts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import MalformedRecord, MissingFile

DIFFICULTIES = ("simple", "moderate", "challenging", "unknown")


@dataclass
class QuestionRecord:
    id: str
    db_id: str
    text: str
    evidence: str = ""
    difficulty: str = "unknown"
    gold_sql: str | None = None


@dataclass
class Dataset:
    questions: list[QuestionRecord]
    db_root: Path

    def db_path(self, db_id: str) -> Path:
        return self.db_root / db_id / f"{db_id}.sqlite"

    def description_dir(self, db_id: str) -> Path:
        return self.db_root / db_id / "database_description"


def load_dataset(root: str | Path, split: str) -> Dataset:
    """Read `<root>/<split>.json` plus the sibling `databases/` directory.

    Records are arrays of objects with keys question_id / db_id / question /
    evidence / difficulty / SQL; every key except db_id and question may be
    absent. Spider-shaped files carry no difficulty, which defaults to
    "unknown".
    """
    root = Path(root)
    questions_file = root / f"{split}.json"
    if not questions_file.exists():
        raise MissingFile(f"questions file not found: {questions_file}")
    db_root = root / "databases"
    if not db_root.exists():
        raise MissingFile(f"database directory not found: {db_root}")

    try:
        records = json.loads(questions_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(-1, "<file>", f"invalid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise MalformedRecord(-1, "<file>", "top-level value is not an array")

    questions: list[QuestionRecord] = []
    seen_ids: set[str] = set()
    for index, record in enumerate(records):
        if not isinstance(record, dict):
            raise MalformedRecord(index, "<record>", "not an object")
        db_id = record.get("db_id")
        if not db_id or not isinstance(db_id, str):
            raise MalformedRecord(index, "db_id")
        text = record.get("question")
        if not text or not isinstance(text, str):
            raise MalformedRecord(index, "question")
        qid = str(record.get("question_id", index))
        if qid in seen_ids:
            raise MalformedRecord(index, "question_id", f"duplicate id {qid!r}")
        seen_ids.add(qid)
        difficulty = record.get("difficulty") or "unknown"
        if difficulty not in DIFFICULTIES:
            difficulty = "unknown"
        questions.append(QuestionRecord(
            id=qid,
            db_id=db_id,
            text=text,
            evidence=(record.get("evidence") or "").strip(),
            difficulty=difficulty,
            gold_sql=record.get("SQL") or record.get("query") or None,
        ))
    return Dataset(questions=questions, db_root=db_root)
