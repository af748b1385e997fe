"""Signature-bucketed index over distinct stored string values.

Short entity strings from questions rarely match stored values exactly, so
candidate retrieval hashes character shingles into banded min-hash
signatures: two strings sharing a band land in the same bucket. Buckets are
deliberately permissive (high recall); callers score and threshold the
candidates afterwards.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..executor import Database
from .schema import DatabaseCatalog, is_textual

_MERSENNE = (1 << 61) - 1
_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class IndexConfig:
    shingle_size: int = 3
    num_perm: int = 64
    bands: int = 32
    max_value_length: int = 128
    max_distinct_values: int = 50_000
    seed: int = 0x5DE

    @property
    def rows_per_band(self) -> int:
        return self.num_perm // self.bands


@dataclass
class SkipEntry:
    table: str
    column: str
    reason: str              # "non_textual" | "too_many_values"


@dataclass
class ValueIndex:
    db_id: str
    db_path: Path
    config: IndexConfig
    buckets: dict[tuple[int, tuple[int, ...]], list[tuple[str, str, str]]] = field(default_factory=dict)
    exact_only: list[tuple[str, str]] = field(default_factory=list)   # overflow columns
    skipped: list[SkipEntry] = field(default_factory=list)
    indexed_value_count: int = 0

    def lookup(self, text: str) -> list[tuple[str, str, str]]:
        """Candidate (table, column, stored value) triples for a query string.

        Bucket collisions first, then exact matches against overflow columns
        straight from the database. Result order is deterministic.
        """
        found: dict[tuple[str, str, str], None] = {}
        signature = minhash_signature(text, self.config)
        if signature is not None:
            for band_key in band_keys(signature, self.config):
                for payload in self.buckets.get(band_key, ()):
                    found.setdefault(payload, None)
        if self.exact_only:
            with Database(self.db_path) as db:
                conn = db.connection()
                for table, column in self.exact_only:
                    tq, cq = table.replace('"', '""'), column.replace('"', '""')
                    row = conn.execute(
                        f'SELECT "{cq}" FROM "{tq}" WHERE "{cq}" = ? LIMIT 1',
                        (text,)).fetchone()
                    if row is not None:
                        found.setdefault((table, column, str(row[0])), None)
        return sorted(found)


def normalize(text: str) -> str:
    return _WS.sub(" ", text.strip().lower())


def shingles(text: str, size: int = 3) -> set[str]:
    norm = normalize(text)
    if not norm:
        return set()
    if len(norm) <= size:
        return {norm}
    return {norm[i:i + size] for i in range(len(norm) - size + 1)}


def _stable_hash(shingle: str) -> int:
    return int.from_bytes(hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest(), "big")


def _permutations(config: IndexConfig) -> list[tuple[int, int]]:
    rng = random.Random(config.seed)
    return [(rng.randrange(1, _MERSENNE), rng.randrange(0, _MERSENNE))
            for _ in range(config.num_perm)]


_PERM_CACHE: dict[IndexConfig, list[tuple[int, int]]] = {}


def minhash_signature(text: str, config: IndexConfig) -> tuple[int, ...] | None:
    grams = shingles(text, config.shingle_size)
    if not grams:
        return None
    perms = _PERM_CACHE.get(config)
    if perms is None:
        perms = _PERM_CACHE[config] = _permutations(config)
    hashes = [_stable_hash(g) for g in grams]
    return tuple(min((a * h + b) % _MERSENNE for h in hashes) for a, b in perms)


def band_keys(signature: tuple[int, ...], config: IndexConfig):
    r = config.rows_per_band
    for band in range(config.bands):
        yield (band, signature[band * r:(band + 1) * r])


def jaccard(a: str, b: str, size: int = 3) -> float:
    """Shingle-set similarity; the exact quantity the signatures approximate."""
    sa, sb = shingles(a, size), shingles(b, size)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def build_value_index(catalog: DatabaseCatalog, db: Database,
                      config: IndexConfig | None = None) -> ValueIndex:
    """Bucket all distinct textual values of indexable columns.

    Columns are skipped (with a recorded reason) when non-textual or above
    the distinct-value cap; overflow columns stay reachable through exact
    lookups. Building twice over the same database yields identical buckets.
    """
    config = config or IndexConfig()
    index = ValueIndex(db_id=catalog.db_id, db_path=db.path, config=config)
    conn = db.connection()

    for table in catalog.tables:
        tq = table.name.replace('"', '""')
        for column in table.columns:
            if not is_textual(column):
                index.skipped.append(SkipEntry(table.name, column.name, "non_textual"))
                continue
            cq = column.name.replace('"', '""')
            try:
                distinct = conn.execute(
                    f'SELECT COUNT(DISTINCT "{cq}") FROM "{tq}"').fetchone()[0]
            except Exception:
                index.skipped.append(SkipEntry(table.name, column.name, "non_textual"))
                continue
            if distinct > config.max_distinct_values:
                index.skipped.append(SkipEntry(table.name, column.name, "too_many_values"))
                index.exact_only.append((table.name, column.name))
                continue
            rows = conn.execute(
                f'SELECT DISTINCT "{cq}" FROM "{tq}" WHERE "{cq}" IS NOT NULL '
                f'ORDER BY "{cq}"').fetchall()
            for (value,) in rows:
                if not isinstance(value, str):
                    continue
                if not value or len(value) > config.max_value_length:
                    continue
                signature = minhash_signature(value, config)
                if signature is None:
                    continue
                payload = (table.name, column.name, value)
                for band_key in band_keys(signature, config):
                    bucket = index.buckets.setdefault(band_key, [])
                    if payload not in bucket:
                        bucket.append(payload)
                index.indexed_value_count += 1
    return index
