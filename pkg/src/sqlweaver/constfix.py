"""Constant value repair over parsed SQL.

Literal comparisons in WHERE/HAVING are checked against the live column:
type compatibility, existence of matching rows, and enumeration-map
membership. Flagged mismatches are repaired in a fixed order — optional
user rewrite rules, a case-insensitive match in the same column, the
enum label-to-stored-value translation, then sibling text columns of the
same table that contain the literal (which moves the comparison to that
column). Everything else in the statement survives byte-for-byte.
"""

from __future__ import annotations

import logging
import sqlite3
from pathlib import Path

from .generation import Repair
from .mining import ColumnRef, SchemaCard, open_readonly
from .sqltext import (
    EQUALITY_OPS,
    Analysis,
    LiteralComparison,
    analyze,
    find_literal_comparisons,
    render_literal,
    replace_spans,
)

logger = logging.getLogger(__name__)

_NUMERIC_AFFINITY_HINTS = ("INT", "REAL", "FLOA", "DOUB", "NUMERIC", "DECIMAL", "BOOLEAN", "DATE")


def _is_numeric_column(declared: str) -> bool:
    d = (declared or "").upper()
    if "CHAR" in d or "CLOB" in d or "TEXT" in d or "BLOB" in d:
        return False
    return any(h in d for h in _NUMERIC_AFFINITY_HINTS)


def _is_text_column(declared: str) -> bool:
    d = (declared or "").upper()
    return "CHAR" in d or "CLOB" in d or "TEXT" in d


def _numeric_parsable(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


class _Db:
    """Tiny query helper bound to one read-only connection."""

    def __init__(self, conn: sqlite3.Connection) -> None:
        self.conn = conn

    def has_row(self, table: str, column: str, value: object) -> bool:
        cur = self.conn.execute(
            f'SELECT 1 FROM "{table}" WHERE "{column}" = ? LIMIT 1', (value,)
        )
        return cur.fetchone() is not None

    def row_count(self, table: str) -> int:
        return self.conn.execute(f'SELECT count(*) FROM "{table}"').fetchone()[0]

    def case_insensitive_match(self, table: str, column: str, value: str) -> object | None:
        cur = self.conn.execute(
            f'SELECT "{column}" FROM "{table}" WHERE lower("{column}") = lower(?) '
            f'ORDER BY "{column}" LIMIT 1',
            (value,),
        )
        row = cur.fetchone()
        return row[0] if row else None


def _resolve_column(
    comparison: LiteralComparison, analysis: Analysis, card: SchemaCard
) -> ColumnRef | None:
    """Map a (qualifier, column) reference to a real card column."""
    chain = analysis.scope_chain(comparison.scope_id)
    if comparison.qualifier:
        wanted = comparison.qualifier.lower()
        for scope in chain:
            for table, alias in scope.tables:
                bound = (alias or table or "").lower()
                if bound == wanted and table is not None:
                    return card.resolve_column(table, comparison.column)
        return card.resolve_column(comparison.qualifier, comparison.column)
    for scope in chain:
        for table, _alias in scope.tables:
            if table is None:
                continue
            ref = card.resolve_column(table, comparison.column)
            if ref is not None:
                return ref
    return None


def _is_valid(
    comparison: LiteralComparison, ref: ColumnRef, card: SchemaCard, db: _Db
) -> bool:
    table_info = card.table(ref.table)
    assert table_info is not None
    column_info = table_info.column(ref.column)
    assert column_info is not None
    value = comparison.value

    if isinstance(value, str) and _is_numeric_column(column_info.declared_type):
        if not _numeric_parsable(value):
            return False  # text where numbers live: the canonical enum-label slip

    if comparison.op not in EQUALITY_OPS:
        return True  # range comparisons are only type-checked

    enum_values = card.enum_for(ref)
    if enum_values is not None:
        if any(v.stored_value == value or str(v.stored_value) == str(value) for v in enum_values):
            return True
    if db.row_count(ref.table) == 0:
        return True  # nothing to disprove against
    return db.has_row(ref.table, ref.column, value)


def _candidate_passes(value: object, ref: ColumnRef, card: SchemaCard, db: _Db) -> bool:
    enum_values = card.enum_for(ref)
    if enum_values is not None and any(v.stored_value == value for v in enum_values):
        return True
    return db.has_row(ref.table, ref.column, value)


def constant_value_fix(
    sql: str,
    db_path: str | Path,
    card: SchemaCard,
    rewrite_table: dict[str, str] | None = None,
) -> tuple[str, list[Repair]]:
    """Repair literal/column mismatches in place; returns (sql, repairs).

    Valid statements come back byte-identical with no repairs. Mismatches
    with no usable alternative stay unchanged but are still reported, with
    after equal to before. Raises SqlParseError for unparseable SQL.
    """
    analysis = analyze(sql)
    comparisons = find_literal_comparisons(analysis)
    if not comparisons:
        return sql, []

    conn = open_readonly(db_path)
    db = _Db(conn)
    repairs: list[Repair] = []
    replacements: list[tuple[int, int, str]] = []
    try:
        for comparison in comparisons:
            if comparison.literal_is_dquoted and _looks_like_identifier(comparison, card):
                continue
            ref = _resolve_column(comparison, analysis, card)
            if ref is None:
                continue  # unknown column: execution feedback will deal with it
            if _is_valid(comparison, ref, card, db):
                continue

            original = sql[comparison.literal_span[0] : comparison.literal_span[1]]
            fixed = _find_alternative(comparison, ref, card, db, rewrite_table or {})
            if fixed is None:
                repairs.append(
                    Repair(
                        kind="constant_fix",
                        before=original,
                        after=original,
                        reason=f"no match for {original} in {ref.key()} and no usable alternative",
                    )
                )
                continue
            strategy, new_value, new_column = fixed
            if new_column is not None:
                qualifier = f"{comparison.qualifier}." if comparison.qualifier else ""
                before_text = sql[comparison.column_span[0] : comparison.column_span[1]]
                after_text = f"{qualifier}{new_column.column}"
                replacements.append((*comparison.column_span, after_text))
                repairs.append(
                    Repair(
                        kind="constant_fix",
                        before=before_text,
                        after=after_text,
                        reason=f"{strategy}: literal {original} found in sibling column {new_column.key()}",
                    )
                )
            else:
                rendered = render_literal(new_value)
                replacements.append((*comparison.literal_span, rendered))
                repairs.append(
                    Repair(
                        kind="constant_fix",
                        before=original,
                        after=rendered,
                        reason=f"{strategy} on {ref.key()}",
                    )
                )
    finally:
        conn.close()

    if not replacements:
        return sql, repairs
    return replace_spans(sql, replacements), repairs


def _looks_like_identifier(comparison: LiteralComparison, card: SchemaCard) -> bool:
    value = str(comparison.value)
    return any(
        c.name.lower() == value.lower() for t in card.tables for c in t.columns
    )


def _find_alternative(
    comparison: LiteralComparison,
    ref: ColumnRef,
    card: SchemaCard,
    db: _Db,
    rewrite_table: dict[str, str],
) -> tuple[str, object, ColumnRef | None] | None:
    """(strategy, replacement value, moved-to column) for a flagged literal."""
    value = comparison.value

    rewritten = rewrite_table.get(str(value))
    if rewritten is not None and _candidate_passes(rewritten, ref, card, db):
        return "user rewrite rule", rewritten, None

    equality = comparison.op in EQUALITY_OPS
    if equality and isinstance(value, str):
        stored = db.case_insensitive_match(ref.table, ref.column, value)
        if stored is not None and stored != value:
            return "case-insensitive match", stored, None

    enum_values = card.enum_for(ref)
    if enum_values is not None and isinstance(value, str):
        for entry in enum_values:
            if str(entry.label).lower() == value.lower():
                return "enum label translated to stored value", entry.stored_value, None

    if equality and isinstance(value, str):
        table_info = card.table(ref.table)
        assert table_info is not None
        for sibling in table_info.columns:
            if sibling.name.lower() == ref.column.lower():
                continue
            if not _is_text_column(sibling.declared_type):
                continue
            if db.has_row(ref.table, sibling.name, value):
                return "sibling column match", value, ColumnRef(ref.table, sibling.name)
    return None
