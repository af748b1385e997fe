"""Schema introspection and column-description ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import UnreadableDatabase
from ..executor import Database

TEXT_AFFINITIES = ("CHAR", "CLOB", "TEXT")


@dataclass
class ColumnInfo:
    name: str
    type: str
    is_primary_key: bool = False


@dataclass
class ForeignKey:
    table: str
    column: str
    ref_table: str
    ref_column: str


@dataclass
class TableInfo:
    name: str
    columns: list[ColumnInfo] = field(default_factory=list)
    foreign_keys: list[ForeignKey] = field(default_factory=list)

    def column(self, name: str) -> ColumnInfo | None:
        lowered = name.lower()
        for col in self.columns:
            if col.name.lower() == lowered:
                return col
        return None


@dataclass
class ColumnDescription:
    column_description: str = ""
    value_description: str = ""
    value_examples: list[str] = field(default_factory=list)


@dataclass
class DatabaseCatalog:
    db_id: str
    tables: list[TableInfo] = field(default_factory=list)
    descriptions: dict[tuple[str, str], ColumnDescription] = field(default_factory=dict)

    def table(self, name: str) -> TableInfo | None:
        lowered = name.lower()
        for table in self.tables:
            if table.name.lower() == lowered:
                return table
        return None

    def has_column(self, table: str, column: str) -> bool:
        info = self.table(table)
        return info is not None and info.column(column) is not None

    def all_columns(self) -> list[tuple[str, str]]:
        return [(t.name, c.name) for t in self.tables for c in t.columns]

    def description(self, table: str, column: str) -> ColumnDescription:
        return self.descriptions.get((table.lower(), column.lower()), ColumnDescription())

    def resolve_column(self, name: str) -> tuple[str, str] | None:
        """Resolve 'table.column' or a bare column name to catalog casing."""
        if "." in name:
            table, column = name.split(".", 1)
            info = self.table(table.strip().strip('"`'))
            if info is None:
                return None
            col = info.column(column.strip().strip('"`'))
            return (info.name, col.name) if col else None
        bare = name.strip().strip('"`').lower()
        for table in self.tables:
            for col in table.columns:
                if col.name.lower() == bare:
                    return (table.name, col.name)
        return None


def is_textual(column: ColumnInfo) -> bool:
    declared = column.type.upper()
    return any(marker in declared for marker in TEXT_AFFINITIES) or declared == ""


def introspect_schema(db: Database | str | Path, db_id: str | None = None) -> DatabaseCatalog:
    """Capture every user table with column types, primary and foreign keys."""
    handle = db if isinstance(db, Database) else Database(db)
    conn = handle.connection()
    if db_id is None:
        db_id = handle.path.stem
    try:
        names = [row[0] for row in conn.execute(
            "SELECT name FROM sqlite_master WHERE type = 'table' "
            "AND name NOT LIKE 'sqlite_%' ORDER BY name")]
    except Exception as exc:  # pragma: no cover - corrupt files
        raise UnreadableDatabase(str(exc)) from exc

    catalog = DatabaseCatalog(db_id=db_id)
    for name in names:
        table = TableInfo(name=name)
        quoted = name.replace('"', '""')
        for _, col_name, col_type, _, _, pk in conn.execute(f'PRAGMA table_info("{quoted}")'):
            table.columns.append(ColumnInfo(name=col_name, type=col_type or "",
                                            is_primary_key=bool(pk)))
        for row in conn.execute(f'PRAGMA foreign_key_list("{quoted}")'):
            # row: (id, seq, ref_table, from_col, to_col, ...)
            ref_table, from_col, to_col = row[2], row[3], row[4]
            if to_col is None:
                continue
            table.foreign_keys.append(ForeignKey(table=name, column=from_col,
                                                 ref_table=ref_table, ref_column=to_col))
        catalog.tables.append(table)
    return catalog


def _read_csv_rows(path: Path) -> list[dict]:
    # BIRD description files are an encoding grab bag
    for encoding in ("utf-8-sig", "cp1252", "latin-1"):
        try:
            with path.open(newline="", encoding=encoding) as fh:
                return list(csv.DictReader(fh))
        except UnicodeDecodeError:
            continue
    return []


def load_descriptions(catalog: DatabaseCatalog, description_dir: str | Path) -> None:
    """Attach `<table>.csv` description rows; absent files are fine."""
    description_dir = Path(description_dir)
    if not description_dir.is_dir():
        return
    for table in catalog.tables:
        path = description_dir / f"{table.name}.csv"
        if not path.exists():
            continue
        for row in _read_csv_rows(path):
            original = (row.get("original_column_name") or "").strip()
            if not original or table.column(original) is None:
                continue
            catalog.descriptions[(table.name.lower(), original.lower())] = ColumnDescription(
                column_description=(row.get("column_description") or "").strip(),
                value_description=(row.get("value_description") or "").strip(),
            )


def collect_value_examples(catalog: DatabaseCatalog, db: Database,
                           per_column: int = 3, max_length: int = 60) -> None:
    """Sample short distinct stored values for each textual column."""
    conn = db.connection()
    for table in catalog.tables:
        tq = table.name.replace('"', '""')
        for column in table.columns:
            if not is_textual(column):
                continue
            cq = column.name.replace('"', '""')
            try:
                rows = conn.execute(
                    f'SELECT DISTINCT "{cq}" FROM "{tq}" '
                    f'WHERE "{cq}" IS NOT NULL ORDER BY "{cq}" LIMIT ?',
                    (per_column,)).fetchall()
            except Exception:
                continue
            examples = [str(r[0]) for r in rows
                        if isinstance(r[0], str) and 0 < len(str(r[0])) <= max_length]
            if not examples:
                continue
            key = (table.name.lower(), column.name.lower())
            desc = catalog.descriptions.get(key)
            if desc is None:
                desc = ColumnDescription()
                catalog.descriptions[key] = desc
            desc.value_examples = examples


def build_catalog(db_path: str | Path, description_dir: str | Path | None = None,
                  db_id: str | None = None, example_cap: int = 3) -> DatabaseCatalog:
    """Introspect a database and attach descriptions plus value examples."""
    with Database(db_path) as db:
        catalog = introspect_schema(db, db_id=db_id)
        if description_dir is not None:
            load_descriptions(catalog, description_dir)
        collect_value_examples(catalog, db, per_column=example_cap)
    return catalog
