"""SQL generation: prompt rendering, candidates, and self-correction.

Three prompt styles render the same linked schema differently; candidates
come back through the gateway, get their constant values repaired against
live data, and are executed read-only. Failures feed a bounded correction
loop that re-prompts with the database's verbatim error message.
"""

from __future__ import annotations

import logging
import re
import sqlite3
import threading
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import GatewayError, GenerationError, SqlParseError
from .gateway import CompletionRequest, Gateway
from .linking import LinkedSchema, auxiliary_block, render_linked_schema
from .mining import SchemaCard, open_readonly
from .sqltext import is_read_only, statement_kind, truncate_at_semicolon

logger = logging.getLogger(__name__)

EXECUTION_TIMEOUT_S = 5.0


class PromptStyle(str, Enum):
    CODE = "code_representation"
    NATURAL = "natural_language"
    SQLFUSE = "sqlfuse"


@dataclass
class GenConfig:
    n_candidates: int = 4
    max_turns: int = 2
    style: PromptStyle = PromptStyle.SQLFUSE

    def __post_init__(self) -> None:
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        self.style = PromptStyle(self.style)


@dataclass
class Repair:
    kind: str  # constant_fix | regenerated
    before: str
    after: str
    reason: str

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind, "before": self.before, "after": self.after, "reason": self.reason}


@dataclass
class SqlCandidate:
    sql: str
    turn: int = 0
    repairs: list[Repair] = field(default_factory=list)
    executable: bool = False
    last_error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "sql": self.sql,
            "turn": self.turn,
            "repairs": [r.to_dict() for r in self.repairs],
            "executable": self.executable,
            "last_error": self.last_error,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SqlCandidate":
        return cls(
            sql=d["sql"],
            turn=d.get("turn", 0),
            repairs=[Repair(**r) for r in d.get("repairs", [])],
            executable=d.get("executable", False),
            last_error=d.get("last_error"),
        )


def _resource(name: str) -> str:
    return resources.files("sqlweaver").joinpath("resources", name).read_text(encoding="utf-8")


_CODE_TEMPLATE = _resource("sqlgen_code_v1.txt")
_NATURAL_TEMPLATE = _resource("sqlgen_natural_v1.txt")
_SQLFUSE_TEMPLATE = _resource("sqlgen_sqlfuse_v1.txt")
_CORRECTION_TEMPLATE = _resource("sqlgen_correction_v1.txt")


# --- prompt rendering ---------------------------------------------------------


def _linked_tables(ls: LinkedSchema, card: SchemaCard) -> list:
    wanted = {t.lower() for t in ls.tables}
    tables = [t for t in card.tables if t.name.lower() in wanted]
    return tables or list(card.tables)


def _ddl_schema(ls: LinkedSchema, card: SchemaCard) -> str:
    tables = _linked_tables(ls, card)
    names = {t.name.lower() for t in tables}
    statements = []
    for table in tables:
        entries: list[tuple[str, str]] = []  # (definition, comment)
        for col in table.columns:
            definition = f"{col.name} {col.declared_type}".rstrip()
            if not col.nullable:
                definition += " NOT NULL"
            entries.append((definition, col.comment))
        pk = card.primary_keys.get(table.name)
        if pk:
            entries.append((f"PRIMARY KEY ({', '.join(pk)})", ""))
        for fk in card.foreign_keys:
            if fk.child.table == table.name and fk.parent.table.lower() in names:
                entries.append(
                    (f"FOREIGN KEY ({fk.child.column}) REFERENCES {fk.parent.table}({fk.parent.column})", "")
                )
        lines = [f"CREATE TABLE {table.name} (" + (f" -- {table.comment}" if table.comment else "")]
        for i, (definition, comment) in enumerate(entries):
            line = f"    {definition}"
            if i < len(entries) - 1:
                line += ","
            if comment:
                line += f" -- {comment}"
            lines.append(line)
        lines.append(");")
        statements.append("\n".join(lines))
    return "\n\n".join(statements)


def _prose_schema(ls: LinkedSchema, card: SchemaCard) -> str:
    tables = _linked_tables(ls, card)
    sentences = []
    for table in tables:
        described = [
            f"{c.name} ({c.declared_type or 'any type'}{', ' + c.comment if c.comment else ''})"
            for c in table.columns
        ]
        sentence = f"The table {table.name}"
        if table.comment:
            sentence += f", {table.comment},"
        sentence += " has columns " + "; ".join(described) + "."
        pk = card.primary_keys.get(table.name)
        if pk:
            sentence += f" Its primary key is {', '.join(pk)}."
        sentences.append(sentence)
    for fk in card.foreign_keys:
        if any(t.name == fk.child.table for t in tables) and any(t.name == fk.parent.table for t in tables):
            sentences.append(f"Column {fk.child.key()} references {fk.parent.key()}.")
    return "\n".join(sentences)


def _compact_schema(ls: LinkedSchema, card: SchemaCard) -> str:
    tables = _linked_tables(ls, card)
    lines = []
    for table in tables:
        cols = ", ".join(f"{c.name} {c.declared_type}".rstrip() for c in table.columns)
        line = f"{table.name}({cols})"
        if table.comment:
            line += f" -- {table.comment}"
        lines.append(line)
    return "\n".join(lines)


def render_prompt(style: PromptStyle, question: str, ls: LinkedSchema, card: SchemaCard) -> str:
    """Deterministic generation prompt over the linked schema items."""
    style = PromptStyle(style)
    if style is PromptStyle.CODE:
        return _CODE_TEMPLATE.format(schema_ddl=_ddl_schema(ls, card), question=question)
    if style is PromptStyle.NATURAL:
        return _NATURAL_TEMPLATE.format(schema_prose=_prose_schema(ls, card), question=question)
    rationale_section = ""
    if ls.rationale:
        rationale_section = f"\nReasoning from schema linking:\n{ls.rationale}\n"
    linked_names = [t.name for t in _linked_tables(ls, card)]
    return _SQLFUSE_TEMPLATE.format(
        database_id=card.database_id,
        compact_schema=_compact_schema(ls, card),
        auxiliary_block=auxiliary_block(card, linked_names),
        linking_block=render_linked_schema(ls),
        rationale_section=rationale_section,
        question=question,
    )


def correction_prompt(original_prompt: str, sql: str, error: str) -> str:
    return _CORRECTION_TEMPLATE.format(original_prompt=original_prompt, sql=sql, error=error)


# --- candidate extraction -----------------------------------------------------

_FENCE_RE = re.compile(r"```(?:sql|sqlite)?\s*\n?(.*?)```", re.IGNORECASE | re.DOTALL)
_SQL_START_RE = re.compile(r"\b(select|with)\b", re.IGNORECASE)


def extract_sql(response: str) -> str:
    """First SQL statement of a model response: fenced block or first statement."""
    m = _FENCE_RE.search(response)
    text = m.group(1) if m else response
    start = _SQL_START_RE.search(text)
    if start:
        text = text[start.start() :]
    return truncate_at_semicolon(text).strip()


def generate_candidates(prompt: str, gateway: Gateway, cfg: GenConfig) -> list[SqlCandidate]:
    """Issue n completions; duplicates are kept for the critic to see."""
    candidates = []
    for _ in range(cfg.n_candidates):
        try:
            response = gateway.complete(CompletionRequest(prompt=prompt))
        except GatewayError as exc:
            raise GenerationError(f"gateway failure during generation: {exc}") from exc
        candidates.append(SqlCandidate(sql=extract_sql(response)))
    return candidates


# --- execution ----------------------------------------------------------------


@dataclass
class ExecutionOutcome:
    ok: bool
    error: str | None = None
    rows: list[tuple] | None = None
    columns: list[str] | None = None


def execution_check(sql: str, db: str | Path, timeout_s: float = EXECUTION_TIMEOUT_S) -> ExecutionOutcome:
    """Execute read-only with a statement timeout; never mutates the database.

    Non-SELECT statements are rejected before touching the engine; the
    connection itself is opened read-only as a second line of defense.
    """
    try:
        kind = statement_kind(sql)
    except SqlParseError as exc:
        return ExecutionOutcome(ok=False, error=f"rejected-statement: cannot parse statement ({exc})")
    if not is_read_only(sql):
        return ExecutionOutcome(ok=False, error=f"rejected-statement: {kind} is not a read statement")
    try:
        conn = open_readonly(db)
    except Exception as exc:
        return ExecutionOutcome(ok=False, error=str(exc))
    timer = threading.Timer(timeout_s, conn.interrupt)
    timer.daemon = True
    try:
        timer.start()
        cur = conn.execute(sql)
        rows = cur.fetchall()
        columns = [d[0] for d in cur.description] if cur.description else []
        return ExecutionOutcome(ok=True, rows=rows, columns=columns)
    except sqlite3.OperationalError as exc:
        if "interrupted" in str(exc):
            return ExecutionOutcome(ok=False, error=f"timeout after {timeout_s:.0f}s: {exc}")
        return ExecutionOutcome(ok=False, error=str(exc))
    except sqlite3.Error as exc:
        return ExecutionOutcome(ok=False, error=str(exc))
    finally:
        timer.cancel()
        conn.close()


# --- the loop -----------------------------------------------------------------


def self_correct_loop(
    question: str,
    ls: LinkedSchema,
    card: SchemaCard,
    db: str | Path,
    gateway: Gateway,
    cfg: GenConfig,
    *,
    use_constant_fix: bool = True,
    use_execution_check: bool = True,
    rewrite_table: dict[str, str] | None = None,
) -> list[SqlCandidate]:
    """Generate candidates and drive each through repair and correction turns.

    Every candidate makes at most cfg.max_turns gateway calls in total
    (the initial generation plus corrections), so a scripted gateway sees
    exactly n_candidates * max_turns calls when nothing ever executes.
    """
    from .constfix import constant_value_fix  # local import: avoids a cycle

    prompt = render_prompt(cfg.style, question, ls, card)
    candidates = generate_candidates(prompt, gateway, cfg)
    for cand in candidates:
        while True:
            if use_constant_fix:
                try:
                    fixed_sql, repairs = constant_value_fix(cand.sql, db, card, rewrite_table)
                    cand.repairs.extend(repairs)
                    cand.sql = fixed_sql
                except SqlParseError as exc:
                    logger.debug("constant fix skipped, unparseable SQL: %s", exc)
            if not use_execution_check:
                break
            outcome = execution_check(cand.sql, db)
            if outcome.ok:
                cand.executable = True
                cand.last_error = None
                break
            cand.last_error = outcome.error
            if cand.turn + 1 >= cfg.max_turns:
                break
            retry = correction_prompt(prompt, cand.sql, outcome.error or "")
            try:
                response = gateway.complete(CompletionRequest(prompt=retry))
            except GatewayError as exc:
                raise GenerationError(f"gateway failure during correction: {exc}") from exc
            new_sql = extract_sql(response)
            cand.repairs.append(
                Repair(kind="regenerated", before=cand.sql, after=new_sql, reason=outcome.error or "")
            )
            cand.sql = new_sql
            cand.turn += 1
    return candidates
