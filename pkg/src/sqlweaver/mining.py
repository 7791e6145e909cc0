"""Schema mining: keys, relationships and enumeration values from live data.

Produces a SchemaCard for one SQLite database: catalog structure, declared
and inferred primary/foreign keys, one-to-many relations observed in the
data, and enumeration-value mappings parsed from column comments. The card
is what downstream prompting stages render as auxiliary context.
"""

from __future__ import annotations

import logging
import re
import sqlite3
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .errors import DatabaseError, EmptySchemaError
from .similarity import trigram_jaccard

logger = logging.getLogger(__name__)

DECLARED = "declared"
INFERRED = "inferred"


@dataclass(frozen=True)
class ColumnRef:
    table: str
    column: str

    def __post_init__(self) -> None:
        if not self.table or not self.column:
            raise ValueError("table and column must be non-empty")

    def key(self) -> str:
        return f"{self.table}.{self.column}"

    def to_dict(self) -> dict[str, str]:
        return {"table": self.table, "column": self.column}

    @classmethod
    def from_dict(cls, d: dict[str, str]) -> "ColumnRef":
        return cls(d["table"], d["column"])


@dataclass
class ColumnInfo:
    name: str
    declared_type: str
    comment: str = ""
    nullable: bool = True


@dataclass
class TableInfo:
    name: str
    comment: str = ""
    columns: list[ColumnInfo] = field(default_factory=list)

    def column(self, name: str) -> ColumnInfo | None:
        lowered = name.lower()
        for col in self.columns:
            if col.name.lower() == lowered:
                return col
        return None


@dataclass
class ForeignKey:
    child: ColumnRef
    parent: ColumnRef
    origin: str  # declared | inferred
    coverage: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "child": self.child.to_dict(),
            "parent": self.parent.to_dict(),
            "origin": self.origin,
            "coverage": self.coverage,
        }


@dataclass
class OneToMany:
    one_side: ColumnRef
    many_side: ColumnRef
    max_fanout: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "one_side": self.one_side.to_dict(),
            "many_side": self.many_side.to_dict(),
            "max_fanout": self.max_fanout,
        }


@dataclass
class EnumValue:
    stored_value: Any
    label: str

    def to_dict(self) -> dict[str, Any]:
        return {"stored_value": self.stored_value, "label": self.label}


@dataclass
class SchemaCard:
    """Full mined picture of one database."""

    database_id: str
    tables: list[TableInfo] = field(default_factory=list)
    primary_keys: dict[str, list[str]] = field(default_factory=dict)
    foreign_keys: list[ForeignKey] = field(default_factory=list)
    one_to_many: list[OneToMany] = field(default_factory=list)
    enums: dict[ColumnRef, list[EnumValue]] = field(default_factory=dict)

    def table(self, name: str) -> TableInfo | None:
        lowered = name.lower()
        for t in self.tables:
            if t.name.lower() == lowered:
                return t
        return None

    def resolve_table(self, name: str) -> str | None:
        t = self.table(name)
        return t.name if t else None

    def resolve_column(self, table: str, column: str) -> ColumnRef | None:
        t = self.table(table)
        if t is None:
            return None
        col = t.column(column)
        if col is None:
            return None
        return ColumnRef(t.name, col.name)

    def column_refs(self) -> list[ColumnRef]:
        return [ColumnRef(t.name, c.name) for t in self.tables for c in t.columns]

    def enum_for(self, ref: ColumnRef) -> list[EnumValue] | None:
        for key, values in self.enums.items():
            if key.table.lower() == ref.table.lower() and key.column.lower() == ref.column.lower():
                return values
        return None

    def is_primary_key_column(self, ref: ColumnRef) -> bool:
        for table, cols in self.primary_keys.items():
            if table.lower() == ref.table.lower():
                return any(c.lower() == ref.column.lower() for c in cols)
        return False

    def validate(self) -> None:
        """Check referential invariants; raises ValueError on violation."""
        def check(ref: ColumnRef, where: str) -> None:
            if self.resolve_column(ref.table, ref.column) is None:
                raise ValueError(f"{where}: {ref.key()} does not resolve")

        for table, cols in self.primary_keys.items():
            for col in cols:
                check(ColumnRef(table, col), "primary_keys")
        for fk in self.foreign_keys:
            check(fk.child, "foreign_keys.child")
            check(fk.parent, "foreign_keys.parent")
            if not 0.0 <= fk.coverage <= 1.0:
                raise ValueError(f"coverage out of range: {fk.coverage}")
            if fk.origin not in (DECLARED, INFERRED):
                raise ValueError(f"bad origin: {fk.origin}")
        for rel in self.one_to_many:
            check(rel.one_side, "one_to_many.one_side")
            check(rel.many_side, "one_to_many.many_side")
            if rel.max_fanout < 2:
                raise ValueError(f"max_fanout must be >= 2, got {rel.max_fanout}")
        for ref, values in self.enums.items():
            check(ref, "enums")
            stored = [v.stored_value for v in values]
            if len(stored) != len(set(map(repr, stored))):
                raise ValueError(f"duplicate enum values for {ref.key()}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "database_id": self.database_id,
            "tables": [
                {
                    "name": t.name,
                    "comment": t.comment,
                    "columns": [
                        {
                            "name": c.name,
                            "declared_type": c.declared_type,
                            "comment": c.comment,
                            "nullable": c.nullable,
                        }
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
            "primary_keys": {t: list(cols) for t, cols in self.primary_keys.items()},
            "foreign_keys": [fk.to_dict() for fk in self.foreign_keys],
            "one_to_many": [rel.to_dict() for rel in self.one_to_many],
            "enums": {
                ref.key(): [v.to_dict() for v in values]
                for ref, values in self.enums.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SchemaCard":
        card = cls(database_id=d["database_id"])
        for t in d.get("tables", []):
            card.tables.append(
                TableInfo(
                    name=t["name"],
                    comment=t.get("comment", ""),
                    columns=[
                        ColumnInfo(
                            name=c["name"],
                            declared_type=c.get("declared_type", ""),
                            comment=c.get("comment", ""),
                            nullable=c.get("nullable", True),
                        )
                        for c in t.get("columns", [])
                    ],
                )
            )
        card.primary_keys = {t: list(cols) for t, cols in d.get("primary_keys", {}).items()}
        card.foreign_keys = [
            ForeignKey(
                child=ColumnRef.from_dict(fk["child"]),
                parent=ColumnRef.from_dict(fk["parent"]),
                origin=fk["origin"],
                coverage=fk["coverage"],
            )
            for fk in d.get("foreign_keys", [])
        ]
        card.one_to_many = [
            OneToMany(
                one_side=ColumnRef.from_dict(rel["one_side"]),
                many_side=ColumnRef.from_dict(rel["many_side"]),
                max_fanout=rel["max_fanout"],
            )
            for rel in d.get("one_to_many", [])
        ]
        for key, values in d.get("enums", {}).items():
            table, _, column = key.partition(".")
            card.enums[ColumnRef(table, column)] = [
                EnumValue(v["stored_value"], v["label"]) for v in values
            ]
        return card


@dataclass
class MiningConfig:
    sample_row_limit: int = 10_000
    enum_max_distinct: int = 20
    enum_max_ratio: float = 0.2
    fk_min_coverage: float = 0.95
    fk_name_similarity_floor: float = 0.6

    def __post_init__(self) -> None:
        if self.sample_row_limit < 1:
            raise ValueError("sample_row_limit must be >= 1")
        for name in ("enum_max_ratio", "fk_min_coverage", "fk_name_similarity_floor"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")


# --- database access ---------------------------------------------------------


def open_readonly(path: str | Path) -> sqlite3.Connection:
    """Open a SQLite file read-only; DatabaseError when unreadable."""
    p = Path(path)
    if not p.exists():
        raise DatabaseError(f"database file not found: {p}")
    try:
        conn = sqlite3.connect(f"file:{p}?mode=ro", uri=True)
        conn.execute("SELECT 1")
    except sqlite3.Error as exc:
        raise DatabaseError(f"cannot open {p}: {exc}") from exc
    return conn


def _quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _sample_rows(conn: sqlite3.Connection, table: str, limit: int) -> list[tuple]:
    cur = conn.execute(f"SELECT * FROM {_quote(table)} LIMIT ?", (limit,))
    return cur.fetchall()


def _column_values(rows: list[tuple], index: int) -> list[Any]:
    return [row[index] for row in rows]


# --- comment extraction ------------------------------------------------------

_COMMENT_RE = re.compile(r"--\s?(.*)$")


def _line_comment(line: str) -> str | None:
    """Trailing '--' comment of a DDL line, ignoring quoted text."""
    in_quote: str | None = None
    i = 0
    while i < len(line):
        c = line[i]
        if in_quote:
            if c == in_quote:
                in_quote = None
        elif c in ("'", '"'):
            in_quote = c
        elif c == "-" and line.startswith("--", i):
            m = _COMMENT_RE.match(line[i:])
            return m.group(1).strip() if m else ""
        i += 1
    return None


def _parse_ddl_comments(create_sql: str, column_names: list[str]) -> tuple[str, dict[str, str]]:
    """Table and per-column comments out of the stored CREATE TABLE text.

    Convention: a comment on the CREATE line documents the table; a comment
    trailing a column-definition line documents that column.
    """
    table_comment = ""
    column_comments: dict[str, str] = {}
    lowered = {name.lower(): name for name in column_names}
    for line in create_sql.splitlines():
        comment = _line_comment(line)
        if comment is None:
            continue
        head = line[: line.index("--")]
        if re.match(r"\s*CREATE\b", head, re.IGNORECASE):
            table_comment = comment
            continue
        first = re.match(r'\s*[(,]?\s*(?:"([^"]+)"|`([^`]+)`|\[([^\]]+)\]|([A-Za-z_][A-Za-z_0-9$]*))', head)
        if not first:
            continue
        ident = next(g for g in first.groups() if g is not None)
        name = lowered.get(ident.lower())
        if name is not None and name not in column_comments:
            column_comments[name] = comment
    return table_comment, column_comments


# --- operations --------------------------------------------------------------


def introspect_schema(db: str | Path) -> SchemaCard:
    """Structure-only SchemaCard: tables and columns in catalog order."""
    conn = open_readonly(db)
    try:
        try:
            rows = conn.execute(
                "SELECT name, sql FROM sqlite_master WHERE type='table' "
                "AND name NOT LIKE 'sqlite_%'"
            ).fetchall()
        except sqlite3.DatabaseError as exc:
            raise DatabaseError(f"cannot read catalog: {exc}") from exc
        if not rows:
            raise EmptySchemaError(f"no user tables in {db}")
        card = SchemaCard(database_id=Path(db).stem)
        for name, create_sql in rows:
            info = conn.execute(f"PRAGMA table_info({_quote(name)})").fetchall()
            column_names = [r[1] for r in info]
            table_comment, column_comments = _parse_ddl_comments(create_sql or "", column_names)
            table = TableInfo(name=name, comment=table_comment)
            for _cid, col_name, decl_type, notnull, _default, pk in info:
                table.columns.append(
                    ColumnInfo(
                        name=col_name,
                        declared_type=decl_type or "",
                        comment=column_comments.get(col_name, ""),
                        nullable=not (notnull or pk),
                    )
                )
            card.tables.append(table)
        return card
    finally:
        conn.close()


def detect_primary_keys(db: str | Path, card: SchemaCard, cfg: MiningConfig) -> SchemaCard:
    """Fill primary_keys: declared keys win, else a scanned unique column."""
    conn = open_readonly(db)
    try:
        primary_keys: dict[str, list[str]] = {}
        for table in card.tables:
            info = conn.execute(f"PRAGMA table_info({_quote(table.name)})").fetchall()
            declared = [(r[5], r[1]) for r in info if r[5] > 0]
            if declared:
                primary_keys[table.name] = [name for _pos, name in sorted(declared)]
                continue
            rows = _sample_rows(conn, table.name, cfg.sample_row_limit)
            nominated: list[str] = []
            if rows:
                for index, column in enumerate(table.columns):
                    values = _column_values(rows, index)
                    if any(v is None for v in values):
                        continue
                    if len(set(values)) == len(values):
                        nominated = [column.name]
                        break
            primary_keys[table.name] = nominated
        return replace(card, primary_keys=primary_keys)
    finally:
        conn.close()


def _type_affinity(declared: str) -> str:
    d = (declared or "").upper()
    if "INT" in d:
        return "INTEGER"
    if "CHAR" in d or "CLOB" in d or "TEXT" in d:
        return "TEXT"
    if not d or "BLOB" in d:
        return "BLOB"
    if "REAL" in d or "FLOA" in d or "DOUB" in d:
        return "REAL"
    return "NUMERIC"


_NUMERIC_AFFINITIES = {"INTEGER", "REAL", "NUMERIC"}


def _types_compatible(a: str, b: str) -> bool:
    fa, fb = _type_affinity(a), _type_affinity(b)
    if fa in _NUMERIC_AFFINITIES and fb in _NUMERIC_AFFINITIES:
        return True
    return fa == fb


def _name_similarity(child_column: str, parent_table: str, parent_column: str) -> float:
    """Best trigram overlap of the child column against the parent's names.

    The qualified form parent_table + "_" + parent_column covers the common
    convention of naming a reference after the table it points to.
    """
    candidates = (parent_column, f"{parent_table}_{parent_column}", parent_table)
    return max(trigram_jaccard(child_column.lower(), c.lower()) for c in candidates)


def _coverage(child_values: Iterable[Any], parent_values: set[Any]) -> float | None:
    distinct = {v for v in child_values if v is not None}
    if not distinct:
        return None
    contained = sum(1 for v in distinct if v in parent_values)
    return contained / len(distinct)


def infer_foreign_keys(db: str | Path, card: SchemaCard, cfg: MiningConfig) -> SchemaCard:
    """Fill foreign_keys with declared entries plus containment-inferred ones."""
    conn = open_readonly(db)
    try:
        samples: dict[str, list[tuple]] = {
            t.name: _sample_rows(conn, t.name, cfg.sample_row_limit) for t in card.tables
        }
        col_index = {
            (t.name, c.name): i for t in card.tables for i, c in enumerate(t.columns)
        }

        def values_of(table: str, column: str) -> list[Any]:
            return _column_values(samples[table], col_index[(table, column)])

        foreign_keys: list[ForeignKey] = []
        seen: set[tuple[str, str, str, str]] = set()
        for table in card.tables:
            try:
                fk_rows = conn.execute(f"PRAGMA foreign_key_list({_quote(table.name)})").fetchall()
            except sqlite3.DatabaseError:
                fk_rows = []
            for _id, seq, parent_table, from_col, to_col, *_rest in fk_rows:
                parent = card.table(parent_table)
                if parent is None:
                    logger.warning("declared FK on %s references unknown table %s", table.name, parent_table)
                    continue
                if to_col is None:
                    declared_pk = card.primary_keys.get(parent.name, [])
                    to_col = declared_pk[seq] if seq < len(declared_pk) else None
                if to_col is None or parent.column(to_col) is None or table.column(from_col) is None:
                    continue
                child_ref = card.resolve_column(table.name, from_col)
                parent_ref = card.resolve_column(parent.name, to_col)
                assert child_ref and parent_ref
                cov = _coverage(
                    values_of(child_ref.table, child_ref.column),
                    set(values_of(parent_ref.table, parent_ref.column)),
                )
                foreign_keys.append(
                    ForeignKey(child_ref, parent_ref, DECLARED, 1.0 if cov is None else cov)
                )
                seen.add((child_ref.table, child_ref.column, parent_ref.table, parent_ref.column))

        parents = [
            (t.name, cols[0])
            for t in card.tables
            for cols in [card.primary_keys.get(t.name, [])]
            if len(cols) == 1
        ]
        for table in card.tables:
            for column in table.columns:
                for parent_table, parent_column in parents:
                    if parent_table == table.name:
                        continue
                    key = (table.name, column.name, parent_table, parent_column)
                    if key in seen:
                        continue
                    parent_info = card.table(parent_table)
                    assert parent_info is not None
                    parent_col_info = parent_info.column(parent_column)
                    assert parent_col_info is not None
                    if not _types_compatible(column.declared_type, parent_col_info.declared_type):
                        continue
                    cov = _coverage(
                        values_of(table.name, column.name),
                        set(values_of(parent_table, parent_column)),
                    )
                    if cov is None or cov < cfg.fk_min_coverage:
                        continue
                    names_equal = column.name.lower() == parent_column.lower()
                    if not names_equal and _name_similarity(
                        column.name, parent_table, parent_column
                    ) < cfg.fk_name_similarity_floor:
                        continue
                    foreign_keys.append(
                        ForeignKey(
                            ColumnRef(table.name, column.name),
                            ColumnRef(parent_table, parent_column),
                            INFERRED,
                            cov,
                        )
                    )
                    seen.add(key)
        return replace(card, foreign_keys=foreign_keys)
    finally:
        conn.close()


def detect_one_to_many(db: str | Path, card: SchemaCard, cfg: MiningConfig) -> SchemaCard:
    """Fill one_to_many from observed fanout over FK and containment pairs."""
    conn = open_readonly(db)
    try:
        samples: dict[str, list[tuple]] = {
            t.name: _sample_rows(conn, t.name, cfg.sample_row_limit) for t in card.tables
        }
        col_index = {
            (t.name, c.name): i for t in card.tables for i, c in enumerate(t.columns)
        }

        def values_of(table: str, column: str) -> list[Any]:
            return _column_values(samples[table], col_index[(table, column)])

        pairs: list[tuple[ColumnRef, ColumnRef]] = []
        listed: set[tuple[str, str, str, str]] = set()
        for fk in card.foreign_keys:
            key = (fk.child.table, fk.child.column, fk.parent.table, fk.parent.column)
            if key not in listed:
                listed.add(key)
                pairs.append((fk.child, fk.parent))
        # containment pairs that met coverage but not the FK name gate
        parents = [
            (t.name, cols[0])
            for t in card.tables
            for cols in [card.primary_keys.get(t.name, [])]
            if len(cols) == 1
        ]
        for table in card.tables:
            for column in table.columns:
                for parent_table, parent_column in parents:
                    if parent_table == table.name:
                        continue
                    key = (table.name, column.name, parent_table, parent_column)
                    if key in listed:
                        continue
                    parent_info = card.table(parent_table)
                    assert parent_info is not None
                    parent_col = parent_info.column(parent_column)
                    assert parent_col is not None
                    if not _types_compatible(column.declared_type, parent_col.declared_type):
                        continue
                    cov = _coverage(
                        values_of(table.name, column.name),
                        set(values_of(parent_table, parent_column)),
                    )
                    if cov is not None and cov >= cfg.fk_min_coverage:
                        listed.add(key)
                        pairs.append(
                            (ColumnRef(table.name, column.name), ColumnRef(parent_table, parent_column))
                        )

        relations: list[OneToMany] = []
        for child, parent in pairs:
            child_values = [v for v in values_of(child.table, child.column) if v is not None]
            if not child_values:
                continue
            if len(set(child_values)) == len(child_values):
                continue  # unique child column cannot fan out
            parent_values = set(values_of(parent.table, parent.column))
            counts: dict[Any, int] = {}
            for v in child_values:
                if v in parent_values:
                    counts[v] = counts.get(v, 0) + 1
            max_fanout = max(counts.values(), default=0)
            if max_fanout >= 2:
                relations.append(OneToMany(one_side=parent, many_side=child, max_fanout=max_fanout))
        return replace(card, one_to_many=relations)
    finally:
        conn.close()


_ENUM_PART_RE = re.compile(r"^\s*(.+?)\s*:\s*(.+?)\s*$")


def parse_enum_comment(comment: str) -> dict[str, str]:
    """Parse ``value: label`` pairs separated by ';' or ','; {} when none."""
    mapping: dict[str, str] = {}
    for part in re.split(r"[;,]", comment or ""):
        m = _ENUM_PART_RE.match(part)
        if m:
            mapping[m.group(1)] = m.group(2)
    return mapping


def _coerce_enum_value(text: str, affinity: str) -> Any:
    if affinity in _NUMERIC_AFFINITIES:
        try:
            return int(text)
        except ValueError:
            try:
                return float(text)
            except ValueError:
                return text
    return text


def extract_enumerations(db: str | Path, card: SchemaCard, cfg: MiningConfig) -> SchemaCard:
    """Fill enums for low-cardinality non-key columns, labels from comments."""
    conn = open_readonly(db)
    try:
        enums: dict[ColumnRef, list[EnumValue]] = {}
        for table in card.tables:
            rows = _sample_rows(conn, table.name, cfg.sample_row_limit)
            if not rows:
                continue
            for index, column in enumerate(table.columns):
                ref = ColumnRef(table.name, column.name)
                if card.is_primary_key_column(ref):
                    continue
                distinct = {v for v in _column_values(rows, index) if v is not None}
                if not distinct:
                    continue
                if len(distinct) > cfg.enum_max_distinct:
                    continue
                if len(distinct) / len(rows) > cfg.enum_max_ratio:
                    continue
                parsed = parse_enum_comment(column.comment)
                affinity = _type_affinity(column.declared_type)
                values: list[EnumValue] = []
                used: set[str] = set()
                for v in sorted(distinct, key=lambda x: (str(type(x)), str(x))):
                    label = parsed.get(str(v), str(v))
                    values.append(EnumValue(stored_value=v, label=label))
                    used.add(str(v))
                for text, label in parsed.items():
                    if text not in used:
                        values.append(EnumValue(_coerce_enum_value(text, affinity), label))
                enums[ref] = values
        return replace(card, enums=enums)
    finally:
        conn.close()


def mine(db: str | Path, cfg: MiningConfig | None = None) -> SchemaCard:
    """Run the full mining stack on one database file."""
    cfg = cfg or MiningConfig()
    card = introspect_schema(db)
    card = detect_primary_keys(db, card, cfg)
    card = infer_foreign_keys(db, card, cfg)
    card = detect_one_to_many(db, card, cfg)
    card = extract_enumerations(db, card, cfg)
    card.validate()
    return card
