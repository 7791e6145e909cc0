"""Generate-then-rank: the knowledge base and the candidate critic.

A small external knowledge base of question/SQL pairs, each enriched with a
deliberately bad answer, supplies few-shot exemplars in a hindsight format
("A good answer is" / "A bad answer is"). Retrieval works over question
skeletons: questions with schema terms and literals masked out, which makes
similarity comparison domain-agnostic. The critic prompt asks the model to
pick one candidate; unparseable answers fall back deterministically.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .canonjson import canonical_line
from .errors import GatewayError, SqlParseError
from .gateway import CompletionRequest, Gateway
from .generation import SqlCandidate, execution_check, extract_sql
from .linking import LinkedSchema, render_linked_schema
from .mining import SchemaCard
from .similarity import DEFAULT_SCORER, SimilarityScorer
from . import sqltext

logger = logging.getLogger(__name__)

KB_FORMAT = "sqlweaver-kb/v1"
DEFAULT_EXEMPLARS = 3

DEFAULT_CALIBRATION_HINTS = [
    "grouping by the wrong column: aggregate per entity using its key, not a display name",
    "missing join: every referenced table must be connected through its key columns",
    "wrong enumeration literal: condition values must use stored codes, not display labels",
    "unnecessary DISTINCT that changes counts or drops rows",
    "wrong aggregate function for the quantity asked (count vs sum vs avg)",
]

_CRITIC_TEMPLATE = (
    resources.files("sqlweaver").joinpath("resources", "critic_prompt_v1.txt").read_text(encoding="utf-8")
)

SCHEMA_PLACEHOLDER = "<SCHEMA>"
VALUE_PLACEHOLDER = "<VAL>"
_PLACEHOLDER_RE = re.compile(r"<SCHEMA>|<VAL>")


# --- question skeletons ---------------------------------------------------------


def _schema_terms(card: SchemaCard) -> list[str]:
    terms: set[str] = set()
    for table in card.tables:
        terms.add(table.name)
        terms.update(col.name for col in table.columns)
    variants: set[str] = set()
    for term in terms:
        variants.add(term)
        if "_" in term:
            variants.add(term.replace("_", " "))
    return sorted(variants, key=len, reverse=True)


def _enum_labels(card: SchemaCard) -> list[str]:
    labels = {str(v.label) for values in card.enums.values() for v in values if str(v.label).strip()}
    return sorted(labels, key=len, reverse=True)


def _mask_segment(segment: str, card: SchemaCard) -> str:
    spans: list[tuple[int, int, int, str]] = []  # (start, -length, priority, replacement)
    for m in re.finditer(r"'[^']*'|\"[^\"]*\"", segment):
        spans.append((m.start(), -(m.end() - m.start()), 0, VALUE_PLACEHOLDER))
    for term in _schema_terms(card):
        pattern = re.compile(r"\b" + re.escape(term) + r"(?:e?s)?\b", re.IGNORECASE)
        for m in pattern.finditer(segment):
            spans.append((m.start(), -(m.end() - m.start()), 1, SCHEMA_PLACEHOLDER))
    for label in _enum_labels(card):
        pattern = re.compile(r"\b" + re.escape(label) + r"\b", re.IGNORECASE)
        for m in pattern.finditer(segment):
            spans.append((m.start(), -(m.end() - m.start()), 2, VALUE_PLACEHOLDER))
    for m in re.finditer(r"\b\d+(?:\.\d+)?\b", segment):
        spans.append((m.start(), -(m.end() - m.start()), 3, VALUE_PLACEHOLDER))

    chosen: list[tuple[int, int, str]] = []
    last_end = -1
    for start, neg_len, _priority, repl in sorted(spans):
        end = start - neg_len
        if start >= last_end:
            chosen.append((start, end, repl))
            last_end = end
    out: list[str] = []
    cursor = 0
    for start, end, repl in chosen:
        out.append(segment[cursor:start])
        out.append(repl)
        cursor = end
    out.append(segment[cursor:])
    return "".join(out)


def mask_question_skeleton(question: str, card: SchemaCard) -> str:
    """Mask schema terms and literal values; longest match wins, idempotent."""
    pieces: list[str] = []
    cursor = 0
    for m in _PLACEHOLDER_RE.finditer(question):
        pieces.append(_mask_segment(question[cursor : m.start()], card))
        pieces.append(m.group())
        cursor = m.end()
    pieces.append(_mask_segment(question[cursor:], card))
    return " ".join("".join(pieces).split())


_SQL_KEYWORDS_KEEP = {
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset",
    "join", "left", "right", "inner", "outer", "cross", "natural", "on", "using",
    "and", "or", "not", "in", "like", "between", "is", "null", "distinct", "as",
    "union", "intersect", "except", "all", "case", "when", "then", "else", "end",
    "asc", "desc", "with", "exists",
}


def mask_sql_skeleton(sql: str) -> str:
    """Structure-preserving SQL skeleton: entity names and values masked."""
    try:
        tokens = sqltext.tokenize(sql)
    except SqlParseError:
        return sql
    out: list[str] = []
    for i, tok in enumerate(tokens):
        if tok.kind in (sqltext.STRING, sqltext.NUMBER):
            out.append(VALUE_PLACEHOLDER)
        elif tok.kind in (sqltext.QNAME, sqltext.DQUOTED):
            out.append(SCHEMA_PLACEHOLDER)
        elif tok.kind == sqltext.NAME:
            lower = tok.text.lower()
            next_is_call = i + 1 < len(tokens) and tokens[i + 1].text == "("
            if lower in _SQL_KEYWORDS_KEEP or (next_is_call and lower in sqltext.AGGREGATE_NAMES):
                out.append(lower)
            else:
                out.append(SCHEMA_PLACEHOLDER)
        else:
            out.append(tok.text)
    return " ".join(out)


# --- knowledge base -------------------------------------------------------------


@dataclass
class KnowledgeEntry:
    id: str
    question: str
    skeleton: str
    schema_summary: str
    good_answer: str
    bad_answer: str | None = None
    bad_answer_origin: str = "none"  # model | perturbation | none

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "skeleton": self.skeleton,
            "schema_summary": self.schema_summary,
            "good_answer": self.good_answer,
            "bad_answer": self.bad_answer,
            "bad_answer_origin": self.bad_answer_origin,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KnowledgeEntry":
        return cls(
            id=d["id"],
            question=d["question"],
            skeleton=d["skeleton"],
            schema_summary=d.get("schema_summary", ""),
            good_answer=d["good_answer"],
            bad_answer=d.get("bad_answer"),
            bad_answer_origin=d.get("bad_answer_origin", "none"),
        )


class KnowledgeBase:
    """Append-only JSONL store with a header record; reads are lock-free."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.entries: list[KnowledgeEntry] = []
        self._write_lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        import json

        assert self.path is not None
        lines = [l for l in self.path.read_text(encoding="utf-8").splitlines() if l.strip()]
        if not lines:
            return
        header = json.loads(lines[0])
        if header.get("format") != KB_FORMAT:
            raise ValueError(f"unsupported knowledge-base format: {header.get('format')!r}")
        self.entries = [KnowledgeEntry.from_dict(json.loads(line)) for line in lines[1:]]

    def next_id(self) -> str:
        highest = 0
        for entry in self.entries:
            m = re.fullmatch(r"kb-(\d+)", entry.id)
            if m:
                highest = max(highest, int(m.group(1)))
        return f"kb-{highest + 1:04d}"

    def append(self, entry: KnowledgeEntry) -> None:
        with self._write_lock:
            self.entries.append(entry)
            if self.path is not None:
                is_new = not self.path.exists() or self.path.stat().st_size == 0
                with self.path.open("a", encoding="utf-8") as f:
                    if is_new:
                        f.write(canonical_line({"format": KB_FORMAT}) + "\n")
                    f.write(canonical_line(entry.to_dict()) + "\n")

    def __len__(self) -> int:
        return len(self.entries)


# --- hindsight bad answers -------------------------------------------------------

_BAD_ANSWER_PROMPT = """Here is a question and a correct SQL answer.

Question: {question}
Correct SQL: {good_answer}

Write one plausible but subtly WRONG SQL query for the same question, the kind
a careless analyst might produce. Reply with SQL only."""

_AGGREGATE_SWAP = {"count": "sum", "sum": "count", "avg": "max", "min": "max", "max": "min", "total": "count"}


def perturb_sql(sql: str) -> str | None:
    """Deterministic wrong-answer oracle: first applicable rule wins.

    Rules: swap the first two distinct select expressions, drop the first
    join predicate, or replace the first aggregate function.
    """
    try:
        analysis = sqltext.analyze(sql)
    except SqlParseError:
        return None
    if analysis.scopes:
        spans = sqltext.select_item_spans(analysis, 0)
        if len(spans) >= 2:
            (s1, e1), (s2, e2) = spans[0], spans[1]
            first, second = sql[s1:e1], sql[s2:e2]
            if first != second:
                return sqltext.replace_spans(sql, [(s1, e1, second), (s2, e2, first)])
    on_span = sqltext.join_condition_span(analysis)
    if on_span is not None:
        start, end = on_span
        while start > 0 and sql[start - 1] == " ":
            start -= 1
        return sqltext.replace_spans(sql, [(start, end, "")])
    agg = sqltext.aggregate_call_span(analysis)
    if agg is not None:
        start, end, name = agg
        return sqltext.replace_spans(sql, [(start, end, _AGGREGATE_SWAP[name])])
    return None


def kb_ingest(
    kb: KnowledgeBase,
    raw_entries: list[dict[str, str]],
    card: SchemaCard,
    gateway: Gateway | None = None,
    db: str | Path | None = None,
) -> tuple[int, list[str]]:
    """Validate, skeletonize and store entries; returns (added, diagnostics).

    Bad answers come from the gateway when one is supplied, otherwise from
    the deterministic perturbation oracle (hermetic mode).
    """
    added = 0
    diagnostics: list[str] = []
    for raw in raw_entries:
        question = raw.get("question", "")
        good_answer = raw.get("good_answer", "")
        if not question or not good_answer:
            diagnostics.append(f"rejected entry (missing fields): {raw!r}")
            continue
        try:
            sqltext.analyze(good_answer)
        except SqlParseError as exc:
            diagnostics.append(f"rejected {question!r}: good answer does not parse ({exc})")
            continue
        if db is not None:
            outcome = execution_check(good_answer, db)
            if not outcome.ok:
                diagnostics.append(f"rejected {question!r}: good answer fails to execute ({outcome.error})")
                continue
        bad_answer: str | None
        if gateway is not None:
            try:
                response = gateway.complete(
                    CompletionRequest(prompt=_BAD_ANSWER_PROMPT.format(question=question, good_answer=good_answer))
                )
                bad_answer = extract_sql(response) or None
                origin = "model" if bad_answer else "none"
            except GatewayError as exc:
                logger.warning("hindsight generation failed, falling back to perturbation: %s", exc)
                bad_answer = perturb_sql(good_answer)
                origin = "perturbation" if bad_answer else "none"
        else:
            bad_answer = perturb_sql(good_answer)
            origin = "perturbation" if bad_answer else "none"
        if bad_answer == good_answer:
            bad_answer, origin = None, "none"
        kb.append(
            KnowledgeEntry(
                id=kb.next_id(),
                question=question,
                skeleton=mask_question_skeleton(question, card),
                schema_summary=raw.get("schema_summary", ""),
                good_answer=good_answer,
                bad_answer=bad_answer,
                bad_answer_origin=origin,
            )
        )
        added += 1
    return added, diagnostics


# --- retrieval and ranking --------------------------------------------------------


def retrieve_examples(
    question: str,
    card: SchemaCard,
    kb: KnowledgeBase,
    k: int,
    scorer: SimilarityScorer = DEFAULT_SCORER,
) -> list[KnowledgeEntry]:
    """Top-k KB entries by skeleton similarity, ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    skeleton = mask_question_skeleton(question, card)
    scored = [(scorer.score(skeleton, entry.skeleton), entry) for entry in kb.entries]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return [entry for _score, entry in scored[:k]]


@dataclass
class CriticVerdict:
    chosen_index: int
    method: str  # parsed | fallback_first_executable | fallback_first
    raw_response: str

    def to_dict(self) -> dict[str, Any]:
        return {"chosen_index": self.chosen_index, "method": self.method, "raw_response": self.raw_response}


def build_critic_prompt(
    question: str,
    ls: LinkedSchema,
    candidates: list[SqlCandidate],
    examples: list[KnowledgeEntry],
    hints: list[str] | None = None,
) -> str:
    if not candidates:
        raise ValueError("candidates must be non-empty")
    hints = DEFAULT_CALIBRATION_HINTS if hints is None else hints
    exemplar_blocks = []
    for entry in examples:
        block = f"Question: {entry.question}\nA good answer is: {entry.good_answer}"
        if entry.bad_answer:
            block += f"\nA bad answer is: {entry.bad_answer}"
        exemplar_blocks.append(block)
    exemplars_section = ("\n\n".join(exemplar_blocks) + "\n\n") if exemplar_blocks else ""
    hints_block = "\n".join(f"- {hint}" for hint in hints) if hints else "- none"
    candidates_block = "\n".join(f"{i + 1}. {c.sql}" for i, c in enumerate(candidates))
    return _CRITIC_TEMPLATE.format(
        exemplars_section=exemplars_section,
        hints_block=hints_block,
        linking_block=render_linked_schema(ls),
        question=question,
        candidates_block=candidates_block,
    )


_ANSWER_RE = re.compile(r"Answer:\s*(\d+)", re.IGNORECASE)


def _fallback(candidates: list[SqlCandidate], raw_response: str) -> CriticVerdict:
    for i, cand in enumerate(candidates):
        if cand.executable:
            return CriticVerdict(i, "fallback_first_executable", raw_response)
    return CriticVerdict(0, "fallback_first", raw_response)


def select_best(
    question: str,
    ls: LinkedSchema,
    card: SchemaCard,
    candidates: list[SqlCandidate],
    kb: KnowledgeBase,
    gateway: Gateway,
    k: int = DEFAULT_EXEMPLARS,
    hints: list[str] | None = None,
    scorer: SimilarityScorer = DEFAULT_SCORER,
) -> CriticVerdict:
    """One critic call; parse ``Answer: <i>`` or fall back deterministically."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    examples = retrieve_examples(question, card, kb, k, scorer) if len(kb) else []
    prompt = build_critic_prompt(question, ls, candidates, examples, hints)
    try:
        response = gateway.complete(CompletionRequest(prompt=prompt))
    except GatewayError as exc:
        return _fallback(candidates, f"<gateway failure: {exc}>")
    m = _ANSWER_RE.search(response)
    if m:
        index = int(m.group(1)) - 1
        if 0 <= index < len(candidates):
            return CriticVerdict(index, "parsed", response)
    return _fallback(candidates, response)
