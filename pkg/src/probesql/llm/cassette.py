"""Append-only request/completion log enabling deterministic replay."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


def fingerprint(template_id: str, bindings: dict[str, str], sampling: dict) -> str:
    """Stable hash; invariant under map-iteration order of the bindings."""
    body = json.dumps(
        {"template_id": template_id, "bindings": bindings, "sampling": sampling},
        sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:24]


@dataclass
class Cassette:
    """JSON-lines cassette; one record per completed call.

    Lookups are exact-match on fingerprint. Appends are serialized through
    an internal lock so concurrent workers can share one writer.
    """

    path: Path
    records: dict[str, list[str]] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        path = Path(path)
        cassette = cls(path=path)
        if path.exists():
            with path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    cassette.records[record["fingerprint"]] = list(record["completions"])
        return cassette

    def get(self, key: str) -> list[str] | None:
        return self.records.get(key)

    def append(self, key: str, template_id: str, bindings: dict[str, str],
               sampling: dict, completions: list[str]) -> None:
        record = {
            "fingerprint": key,
            "template_id": template_id,
            "bindings": bindings,
            "sampling": sampling,
            "completions": completions,
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            self.records[key] = list(completions)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def template_ids(self) -> list[str]:
        """Template ids present in the cassette file, for trace audits."""
        ids = []
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        ids.append(json.loads(line)["template_id"])
        return ids
