"""Brute-force reference implementations used to check mined results.

These deliberately avoid the library's sampling/containment code paths:
they pull entire tables and recompute everything with plain Python loops.
"""

from __future__ import annotations

import sqlite3
from collections import Counter
from pathlib import Path


def all_rows(db: Path, table: str) -> list[tuple]:
    conn = sqlite3.connect(db)
    try:
        return conn.execute(f'SELECT * FROM "{table}"').fetchall()
    finally:
        conn.close()


def table_columns(db: Path, table: str) -> list[tuple[str, str]]:
    """(name, declared type) per column in catalog order."""
    conn = sqlite3.connect(db)
    try:
        return [(r[1], r[2] or "") for r in conn.execute(f'PRAGMA table_info("{table}")')]
    finally:
        conn.close()


def user_tables(db: Path) -> list[str]:
    conn = sqlite3.connect(db)
    try:
        rows = conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'"
        ).fetchall()
        return [r[0] for r in rows]
    finally:
        conn.close()


def column_values(db: Path, table: str, column: str) -> list:
    columns = [name for name, _ in table_columns(db, table)]
    index = columns.index(column)
    return [row[index] for row in all_rows(db, table)]


def inclusion_coverage(db: Path, child: tuple[str, str], parent: tuple[str, str]) -> float | None:
    """|distinct non-null child values contained in parent| / |distinct child values|."""
    child_distinct = {v for v in column_values(db, *child) if v is not None}
    if not child_distinct:
        return None
    parent_values = set(column_values(db, *parent))
    hits = sum(1 for v in child_distinct if v in parent_values)
    return hits / len(child_distinct)


def numeric_affinity(declared: str) -> bool:
    d = declared.upper()
    if "INT" in d or "REAL" in d or "FLOA" in d or "DOUB" in d:
        return True
    if "CHAR" in d or "CLOB" in d or "TEXT" in d or "BLOB" in d or not d:
        return False
    return True  # NUMERIC catch-all


def compatible_types(a: str, b: str) -> bool:
    na, nb = numeric_affinity(a), numeric_affinity(b)
    if na and nb:
        return True
    if na != nb:
        return False
    def bucket(d: str) -> str:
        d = d.upper()
        if "CHAR" in d or "CLOB" in d or "TEXT" in d:
            return "TEXT"
        return "BLOB"
    return bucket(a) == bucket(b)


def single_column_primary_keys(db: Path) -> list[tuple[str, str]]:
    out = []
    conn = sqlite3.connect(db)
    try:
        for table in user_tables(db):
            pk_cols = [r[1] for r in conn.execute(f'PRAGMA table_info("{table}")') if r[5] > 0]
            if len(pk_cols) == 1:
                out.append((table, pk_cols[0]))
    finally:
        conn.close()
    return out


def containment_pairs(db: Path, min_coverage: float) -> list[tuple[tuple[str, str], tuple[str, str], float]]:
    """Every (child column, PK parent column) pair meeting the coverage floor."""
    parents = single_column_primary_keys(db)
    pairs = []
    for table in user_tables(db):
        for column, declared in table_columns(db, table):
            for parent_table, parent_column in parents:
                if parent_table == table:
                    continue
                parent_declared = dict(table_columns(db, parent_table))[parent_column]
                if not compatible_types(declared, parent_declared):
                    continue
                cov = inclusion_coverage(db, (table, column), (parent_table, parent_column))
                if cov is not None and cov >= min_coverage:
                    pairs.append(((table, column), (parent_table, parent_column), cov))
    return pairs


def declared_foreign_keys(db: Path) -> list[tuple[tuple[str, str], tuple[str, str]]]:
    out = []
    conn = sqlite3.connect(db)
    try:
        for table in user_tables(db):
            for _id, _seq, parent, from_col, to_col, *_ in conn.execute(
                f'PRAGMA foreign_key_list("{table}")'
            ):
                out.append(((table, from_col), (parent, to_col)))
    finally:
        conn.close()
    return out


def group_count_relations(db: Path, min_coverage: float) -> set[tuple[str, str, str, str, int]]:
    """Brute-force 1:N detection over FK pairs plus containment pairs.

    Returns {(parent_table, parent_column, child_table, child_column, max_fanout)}.
    """
    candidates: list[tuple[tuple[str, str], tuple[str, str]]] = []
    seen = set()
    for child, parent in declared_foreign_keys(db):
        if (child, parent) not in seen:
            seen.add((child, parent))
            candidates.append((child, parent))
    for child, parent, _cov in containment_pairs(db, min_coverage):
        if (child, parent) not in seen:
            seen.add((child, parent))
            candidates.append((child, parent))

    relations = set()
    for child, parent in candidates:
        values = [v for v in column_values(db, *child) if v is not None]
        if not values or len(set(values)) == len(values):
            continue
        parent_values = set(column_values(db, *parent))
        counts = Counter(v for v in values if v in parent_values)
        if counts and max(counts.values()) >= 2:
            relations.add((parent[0], parent[1], child[0], child[1], max(counts.values())))
    return relations
