"""Bounded, read-only SQL execution and result canonicalization."""

from __future__ import annotations

import re
import sqlite3
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import NotCanonicalizable, UnreadableDatabase


class Status(str, Enum):
    ROWS = "rows"
    EMPTY = "empty"
    ERROR = "error"
    TIMEOUT = "timeout"


@dataclass
class Limits:
    timeout_ms: int = 5_000
    max_rows: int = 500

    def __post_init__(self):
        if self.timeout_ms <= 0 or self.max_rows <= 0:
            raise ValueError("limits must be positive")


@dataclass
class ExecutionOutcome:
    status: Status
    rows: list[tuple] = field(default_factory=list)   # capped at max_rows
    row_count: int = 0                                # true count, beyond the cap
    columns: list[str] = field(default_factory=list)
    error_message: str = ""
    elapsed_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in (Status.ROWS, Status.EMPTY)

    def first_row(self) -> tuple | None:
        return self.rows[0] if self.rows else None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "rows": [list(r) for r in self.rows],
            "row_count": self.row_count,
            "columns": self.columns,
            "error_message": self.error_message,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionOutcome":
        return cls(
            status=Status(data["status"]),
            rows=[tuple(r) for r in data.get("rows", [])],
            row_count=data.get("row_count", 0),
            columns=data.get("columns", []),
            error_message=data.get("error_message", ""),
            elapsed_ms=data.get("elapsed_ms", 0.0),
        )


_LEADING_COMMENT = re.compile(r"^(\s*(--[^\n]*\n|/\*.*?\*/))*\s*", re.DOTALL)


def _leading_keyword(sql: str) -> str:
    rest = _LEADING_COMMENT.sub("", sql)
    match = re.match(r"[A-Za-z]+", rest)
    return match.group(0).upper() if match else ""


class Database:
    """Read-only handle to one embedded database file.

    One in-flight statement per handle; open separate handles for
    concurrent execution.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.exists():
            raise UnreadableDatabase(f"database file not found: {self.path}")
        try:
            self._conn = sqlite3.connect(
                f"file:{self.path}?mode=ro", uri=True, check_same_thread=False)
            self._conn.execute("PRAGMA query_only = ON")
        except sqlite3.Error as exc:
            raise UnreadableDatabase(f"cannot open {self.path}: {exc}") from exc
        self._lock = threading.Lock()

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def connection(self) -> sqlite3.Connection:
        return self._conn

    def execute(self, sql: str, limits: Limits | None = None) -> ExecutionOutcome:
        return execute(self, sql, limits or Limits())


def execute(db: Database, sql: str, limits: Limits) -> ExecutionOutcome:
    """Run one SELECT-form statement under a timeout and row cap.

    Never raises on bad SQL: engine failures come back as status=error with
    the engine's message, and statements that are not a single SELECT/WITH
    are rejected before reaching the engine.
    """
    start = time.perf_counter()
    keyword = _leading_keyword(sql)
    if keyword not in ("SELECT", "WITH"):
        return ExecutionOutcome(
            status=Status.ERROR,
            error_message=f"only SELECT statements are allowed, got {keyword or 'empty input'}",
            elapsed_ms=(time.perf_counter() - start) * 1000)

    conn = db.connection()
    timed_out = threading.Event()

    def interrupt():
        timed_out.set()
        conn.interrupt()

    timer = threading.Timer(limits.timeout_ms / 1000.0, interrupt)
    with db._lock:
        timer.start()
        try:
            cursor = conn.execute(sql)
            columns = [d[0] for d in cursor.description] if cursor.description else []
            stored: list[tuple] = []
            count = 0
            while True:
                batch = cursor.fetchmany(1000)
                if not batch:
                    break
                count += len(batch)
                if len(stored) < limits.max_rows:
                    stored.extend(batch[:limits.max_rows - len(stored)])
            cursor.close()
        except (sqlite3.OperationalError, sqlite3.Warning,
                sqlite3.DatabaseError, sqlite3.ProgrammingError) as exc:
            elapsed = (time.perf_counter() - start) * 1000
            if timed_out.is_set():
                return ExecutionOutcome(status=Status.TIMEOUT,
                                        error_message="statement timed out",
                                        elapsed_ms=elapsed)
            return ExecutionOutcome(status=Status.ERROR, error_message=str(exc),
                                    elapsed_ms=elapsed)
        finally:
            timer.cancel()

    elapsed = (time.perf_counter() - start) * 1000
    if timed_out.is_set():
        return ExecutionOutcome(status=Status.TIMEOUT,
                                error_message="statement timed out",
                                elapsed_ms=elapsed)
    if count == 0:
        return ExecutionOutcome(status=Status.EMPTY, columns=columns, elapsed_ms=elapsed)
    return ExecutionOutcome(status=Status.ROWS, rows=stored, row_count=count,
                            columns=columns, elapsed_ms=elapsed)


# --- canonicalization ---

_NUMERIC_RE = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\Z")


def canonical_value(value):
    """Normalize one cell: numeric strings to numbers, integral floats to ints."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return int(value) if value.is_integer() else value
    if isinstance(value, str):
        text = value.strip()
        if text and _NUMERIC_RE.match(text):
            number = float(text)
            return int(number) if number.is_integer() else number
        return value
    if isinstance(value, bytes):
        return value.hex()
    return value


@dataclass(frozen=True)
class CanonicalResult:
    row_set: frozenset
    row_seq: tuple   # canonical rows in arrival order, for order-sensitive mode

    def __len__(self) -> int:
        return len(self.row_seq)

    def digest(self) -> str:
        import hashlib
        body = repr(sorted(self.row_set, key=repr)).encode()
        return hashlib.sha256(body).hexdigest()[:16]


def canonicalize(outcome: ExecutionOutcome) -> CanonicalResult:
    """Order-insensitive canonical form of a successful outcome.

    Cell values are normalized, tuple-internal order is preserved, and the
    row collection becomes a set. Error/timeout outcomes are not
    canonicalizable.
    """
    if outcome.status not in (Status.ROWS, Status.EMPTY):
        raise NotCanonicalizable(f"cannot canonicalize a {outcome.status.value} outcome")
    rows = tuple(tuple(canonical_value(cell) for cell in row) for row in outcome.rows)
    return CanonicalResult(row_set=frozenset(rows), row_seq=rows)


def results_equal(a: CanonicalResult, b: CanonicalResult,
                  order_sensitive: bool = False) -> bool:
    if order_sensitive:
        return a.row_seq == b.row_seq
    return a.row_set == b.row_set
