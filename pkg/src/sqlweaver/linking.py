"""Schema linking: prompt construction, response parsing, and calibration.

The linking model receives the full schema plus the mined auxiliary
features and answers in a strict sectioned format. Two calibration passes
then repair its output: a rule-based check restores join relations implied
by foreign keys, and a similarity ranking recalls schema items the model
missed. Both passes only ever add items.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources

from .errors import LinkParseError
from .mining import ColumnRef, SchemaCard
from .similarity import DEFAULT_SCORER, SimilarityScorer

logger = logging.getLogger(__name__)

DEFAULT_RECALL_THRESHOLD = 0.55

_SECTION_RE = re.compile(r"^\s*(TABLES|COLUMNS|JOINS|VALUES|REASONING)\s*:\s*(.*)$", re.IGNORECASE)


def _resource(name: str) -> str:
    return resources.files("sqlweaver").joinpath("resources", name).read_text(encoding="utf-8")


LINKING_CONTRACT = _resource("linking_contract_v1.txt").rstrip("\n")
_LINKING_TEMPLATE = _resource("linking_prompt_v1.txt")


@dataclass(frozen=True)
class JoinRelation:
    left: ColumnRef
    right: ColumnRef

    def unordered(self) -> frozenset[str]:
        return frozenset((self.left.key().lower(), self.right.key().lower()))

    def to_dict(self) -> dict:
        return {"left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True)
class ConditionValue:
    column: ColumnRef
    literal: str

    def to_dict(self) -> dict:
        return {"column": self.column.to_dict(), "literal": self.literal}


@dataclass
class LinkedSchema:
    """Question-relevant subset of one schema plus the model's rationale."""

    tables: list[str] = field(default_factory=list)
    columns: list[ColumnRef] = field(default_factory=list)
    join_relations: list[JoinRelation] = field(default_factory=list)
    condition_values: list[ConditionValue] = field(default_factory=list)
    rationale: str = ""
    warnings: list[str] = field(default_factory=list)

    def has_table(self, name: str) -> bool:
        return any(t.lower() == name.lower() for t in self.tables)

    def has_column(self, ref: ColumnRef) -> bool:
        return any(
            c.table.lower() == ref.table.lower() and c.column.lower() == ref.column.lower()
            for c in self.columns
        )

    def has_join(self, join: JoinRelation) -> bool:
        return any(j.unordered() == join.unordered() for j in self.join_relations)

    def add_table(self, name: str) -> None:
        if not self.has_table(name):
            self.tables.append(name)

    def add_column(self, ref: ColumnRef) -> None:
        self.add_table(ref.table)
        if not self.has_column(ref):
            self.columns.append(ref)

    def add_join(self, join: JoinRelation) -> None:
        if not self.has_join(join):
            self.add_column(join.left)
            self.add_column(join.right)
            self.join_relations.append(join)

    def add_condition_value(self, value: ConditionValue) -> None:
        if value not in self.condition_values:
            self.condition_values.append(value)

    def copy(self) -> "LinkedSchema":
        return LinkedSchema(
            tables=list(self.tables),
            columns=list(self.columns),
            join_relations=list(self.join_relations),
            condition_values=list(self.condition_values),
            rationale=self.rationale,
            warnings=list(self.warnings),
        )

    def validate(self, card: SchemaCard) -> None:
        for table in self.tables:
            if card.table(table) is None:
                raise ValueError(f"unknown table in linked schema: {table}")
        for ref in self.columns:
            if card.resolve_column(ref.table, ref.column) is None:
                raise ValueError(f"unknown column in linked schema: {ref.key()}")
            if not self.has_table(ref.table):
                raise ValueError(f"column {ref.key()} without its table")
        for join in self.join_relations:
            if not (self.has_column(join.left) and self.has_column(join.right)):
                raise ValueError("join references unlisted columns")

    def to_dict(self) -> dict:
        return {
            "tables": list(self.tables),
            "columns": [c.to_dict() for c in self.columns],
            "join_relations": [j.to_dict() for j in self.join_relations],
            "condition_values": [v.to_dict() for v in self.condition_values],
            "rationale": self.rationale,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinkedSchema":
        return cls(
            tables=list(d.get("tables", [])),
            columns=[ColumnRef.from_dict(c) for c in d.get("columns", [])],
            join_relations=[
                JoinRelation(ColumnRef.from_dict(j["left"]), ColumnRef.from_dict(j["right"]))
                for j in d.get("join_relations", [])
            ],
            condition_values=[
                ConditionValue(ColumnRef.from_dict(v["column"]), v["literal"])
                for v in d.get("condition_values", [])
            ],
            rationale=d.get("rationale", ""),
            warnings=list(d.get("warnings", [])),
        )


# --- rendering ----------------------------------------------------------------


def schema_block(card: SchemaCard, tables: list[str] | None = None) -> str:
    """Human-readable schema listing with per-column comments."""
    wanted = {t.lower() for t in tables} if tables is not None else None
    lines: list[str] = []
    for table in card.tables:
        if wanted is not None and table.name.lower() not in wanted:
            continue
        header = f"Table: {table.name}"
        if table.comment:
            header += f" -- {table.comment}"
        lines.append(header)
        for col in table.columns:
            entry = f"  {col.name} ({col.declared_type or 'ANY'}"
            entry += ", nullable)" if col.nullable else ", not null)"
            if col.comment:
                entry += f" -- {col.comment}"
            lines.append(entry)
        lines.append("")
    return "\n".join(lines).rstrip("\n")


def enum_line(values) -> str:
    return "; ".join(f"{v.stored_value}: {v.label}" for v in values)


def auxiliary_block(card: SchemaCard, tables: list[str] | None = None) -> str:
    """The mined features rendered as prompt context, in fixed order."""
    wanted = {t.lower() for t in tables} if tables is not None else None

    def keep(*names: str) -> bool:
        return wanted is None or all(n.lower() in wanted for n in names)

    lines: list[str] = ["Primary keys:"]
    pk_lines = [
        f"  {table.name}: {', '.join(cols)}"
        for table in card.tables
        for cols in [card.primary_keys.get(table.name, [])]
        if cols and keep(table.name)
    ]
    lines += pk_lines or ["  none"]
    lines.append("Foreign keys:")
    fk_lines = [
        f"  {fk.child.key()} -> {fk.parent.key()} ({fk.origin}, coverage {fk.coverage:.2f})"
        for fk in card.foreign_keys
        if keep(fk.child.table, fk.parent.table)
    ]
    lines += fk_lines or ["  none"]
    lines.append("One-to-many relations:")
    rel_lines = [
        f"  {rel.one_side.key()} 1:N {rel.many_side.key()} (max fanout {rel.max_fanout})"
        for rel in card.one_to_many
        if keep(rel.one_side.table, rel.many_side.table)
    ]
    lines += rel_lines or ["  none"]
    lines.append("Enumeration values:")
    enum_lines = [
        f"  {ref.key()}: {enum_line(values)}"
        for ref, values in card.enums.items()
        if keep(ref.table)
    ]
    lines += enum_lines or ["  none"]
    return "\n".join(lines)


def build_linking_prompt(question: str, card: SchemaCard) -> str:
    if not card.tables:
        raise ValueError("cannot build a linking prompt from an empty card")
    return _LINKING_TEMPLATE.format(
        database_id=card.database_id,
        schema_block=schema_block(card),
        auxiliary_block=auxiliary_block(card),
        question=question,
        contract=LINKING_CONTRACT,
    )


def render_linked_schema(ls: LinkedSchema) -> str:
    """Render through the output-format contract; inverse of the parser."""
    lines = ["TABLES:"]
    lines += list(ls.tables)
    lines.append("COLUMNS:")
    lines += [c.key() for c in ls.columns]
    lines.append("JOINS:")
    lines += [f"{j.left.key()} = {j.right.key()}" for j in ls.join_relations]
    lines.append("VALUES:")
    lines += [f"{v.column.key()} = '{v.literal.replace(chr(39), chr(39) * 2)}'" for v in ls.condition_values]
    lines.append("REASONING:")
    if ls.rationale:
        lines.append(ls.rationale)
    return "\n".join(lines)


# --- parsing ------------------------------------------------------------------


def _clean_item(line: str) -> str:
    return re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", line).strip()


def _parse_colref(text: str, card: SchemaCard, warnings: list[str]) -> ColumnRef | None:
    text = text.strip().strip("`\"[]")
    if "." in text:
        table, _, column = text.partition(".")
        ref = card.resolve_column(table.strip(), column.strip())
        if ref is None:
            warnings.append(f"unknown column: {text}")
        return ref
    for table in card.tables:
        ref = card.resolve_column(table.name, text)
        if ref is not None:
            return ref
    warnings.append(f"unknown column: {text}")
    return None


def _unquote_literal(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        inner = text[1:-1]
        return inner.replace(text[0] * 2, text[0])
    return text


def parse_linking_response(text: str, card: SchemaCard) -> LinkedSchema:
    """Parse the sectioned linking answer; unknown identifiers are dropped.

    Raises LinkParseError when no section header is recognizable, in which
    case the pipeline falls back to the full schema.
    """
    ls = LinkedSchema()
    section: str | None = None
    rationale_lines: list[str] = []
    saw_section = False
    # split strictly on newlines: splitlines() would also break on
    # control characters that may legitimately appear inside literals
    for line in text.replace("\r\n", "\n").split("\n"):
        m = _SECTION_RE.match(line)
        if m and section != "reasoning":
            section = m.group(1).lower()
            saw_section = True
            remainder = m.group(2).strip()
            if remainder:
                if section == "reasoning":
                    rationale_lines.append(remainder)
                else:
                    _parse_item(section, remainder, ls, card)
            continue
        if section == "reasoning":
            rationale_lines.append(line)
            continue
        if section is None:
            continue
        item = _clean_item(line)
        if item:
            _parse_item(section, item, ls, card)
    if not saw_section:
        raise LinkParseError("no recognizable sections in linking response")
    ls.rationale = "\n".join(rationale_lines).strip()
    return ls


def _parse_item(section: str, item: str, ls: LinkedSchema, card: SchemaCard) -> None:
    if section == "tables":
        resolved = card.resolve_table(item.strip().strip("`\"[]"))
        if resolved is None:
            ls.warnings.append(f"unknown table: {item}")
        else:
            ls.add_table(resolved)
    elif section == "columns":
        ref = _parse_colref(item, card, ls.warnings)
        if ref is not None:
            ls.add_column(ref)
    elif section == "joins":
        left_text, sep, right_text = item.partition("=")
        if not sep:
            ls.warnings.append(f"unparseable join: {item}")
            return
        left = _parse_colref(left_text, card, ls.warnings)
        right = _parse_colref(right_text, card, ls.warnings)
        if left is not None and right is not None:
            ls.add_join(JoinRelation(left, right))
    elif section == "values":
        col_text, sep, literal = item.partition("=")
        if not sep:
            ls.warnings.append(f"unparseable condition value: {item}")
            return
        ref = _parse_colref(col_text, card, ls.warnings)
        if ref is not None:
            ls.add_condition_value(ConditionValue(ref, _unquote_literal(literal)))


# --- calibration --------------------------------------------------------------


def calibrate_join_relations(ls: LinkedSchema, card: SchemaCard) -> LinkedSchema:
    """Restore join relations implied by foreign keys between linked tables."""
    out = ls.copy()
    linked = {t.lower() for t in out.tables}
    for fk in card.foreign_keys:
        if fk.child.table.lower() in linked and fk.parent.table.lower() in linked:
            if fk.child.table.lower() == fk.parent.table.lower():
                continue
            join = JoinRelation(fk.child, fk.parent)
            if not out.has_join(join):
                out.add_join(join)
    return out


def calibrate_similarity_recall(
    question: str,
    ls: LinkedSchema,
    card: SchemaCard,
    scorer: SimilarityScorer = DEFAULT_SCORER,
    threshold: float = DEFAULT_RECALL_THRESHOLD,
) -> LinkedSchema:
    """Append tables/columns whose name or comment scores above the threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    out = ls.copy()
    for table in card.tables:
        if out.has_table(table.name):
            continue
        score = max(scorer.score(question, table.name), scorer.score(question, table.comment))
        if score >= threshold:
            out.add_table(table.name)
    for table in card.tables:
        for col in table.columns:
            ref = ColumnRef(table.name, col.name)
            if out.has_column(ref):
                continue
            score = max(scorer.score(question, col.name), scorer.score(question, col.comment))
            if score >= threshold:
                out.add_column(ref)
    return out


def full_schema_link(card: SchemaCard) -> LinkedSchema:
    """Whole-card LinkedSchema used when linking is off or unparseable."""
    ls = LinkedSchema()
    for table in card.tables:
        ls.add_table(table.name)
        for col in table.columns:
            ls.add_column(ColumnRef(table.name, col.name))
    for fk in card.foreign_keys:
        if fk.child.table.lower() != fk.parent.table.lower():
            ls.add_join(JoinRelation(fk.child, fk.parent))
    return ls
