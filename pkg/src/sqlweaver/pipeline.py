"""End-to-end query pipeline: mine -> link -> generate -> criticize -> execute.

The Engine owns database paths, cached schema cards (keyed by file content
hash), the knowledge base, and the gateways. Every stage honors the
ablation flags; disabling a feature only changes what the downstream
stages see, never how anything is scored or executed.
"""

from __future__ import annotations

import hashlib
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .critic import (
    DEFAULT_CALIBRATION_HINTS,
    DEFAULT_EXEMPLARS,
    CriticVerdict,
    KnowledgeBase,
    _fallback,
    build_critic_prompt,
    retrieve_examples,
    select_best,
)
from .errors import GatewayError, GenerationError, LinkParseError, UnknownDatabase
from .gateway import CompletionRequest, Gateway
from .generation import (
    GenConfig,
    PromptStyle,
    SqlCandidate,
    execution_check,
    render_prompt,
    self_correct_loop,
)
from .linking import (
    DEFAULT_RECALL_THRESHOLD,
    LinkedSchema,
    build_linking_prompt,
    calibrate_join_relations,
    calibrate_similarity_recall,
    full_schema_link,
    parse_linking_response,
)
from .mining import MiningConfig, SchemaCard, mine
from .similarity import DEFAULT_SCORER, SimilarityScorer

logger = logging.getLogger(__name__)


@dataclass
class AblationFlags:
    """Independently toggleable pipeline features."""

    use_primary_key: bool = True
    use_foreign_key: bool = True
    use_one_to_many: bool = True
    use_enums: bool = True
    use_schema_linking: bool = True
    use_cot: bool = True
    use_constant_fix: bool = True
    use_execution_check: bool = True
    use_critic: bool = True
    prompt_style: PromptStyle = PromptStyle.SQLFUSE

    def __post_init__(self) -> None:
        self.prompt_style = PromptStyle(self.prompt_style)

    def to_dict(self) -> dict[str, Any]:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["prompt_style"] = self.prompt_style.value
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AblationFlags":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def apply_flags_to_card(card: SchemaCard, flags: AblationFlags) -> SchemaCard:
    """A copy of the card with the disabled mined features blanked out."""
    return replace(
        card,
        primary_keys=card.primary_keys if flags.use_primary_key else {},
        foreign_keys=card.foreign_keys if flags.use_foreign_key else [],
        one_to_many=card.one_to_many if flags.use_one_to_many else [],
        enums=card.enums if flags.use_enums else {},
    )


@dataclass
class QueryTrace:
    question: str
    linked: LinkedSchema
    prompts: dict[str, str]
    candidates: list[SqlCandidate]
    verdict: CriticVerdict
    chosen_sql: str
    result_rows: list[list[Any]] | None
    timings: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "question": self.question,
            "linked": self.linked.to_dict(),
            "prompts": dict(self.prompts),
            "candidates": [c.to_dict() for c in self.candidates],
            "verdict": self.verdict.to_dict(),
            "chosen_sql": self.chosen_sql,
            "result_rows": self.result_rows,
            "timings": dict(self.timings),
        }


@dataclass
class PipelineConfig:
    mining: MiningConfig = field(default_factory=MiningConfig)
    generation: GenConfig = field(default_factory=GenConfig)
    recall_threshold: float = DEFAULT_RECALL_THRESHOLD
    critic_k: int = DEFAULT_EXEMPLARS
    hints: list[str] = field(default_factory=lambda: list(DEFAULT_CALIBRATION_HINTS))
    rewrite_table: dict[str, str] = field(default_factory=dict)


class Engine:
    """Pipeline façade bound to a set of databases and gateways."""

    def __init__(
        self,
        databases: dict[str, str | Path],
        gateway: Gateway,
        config: PipelineConfig | None = None,
        kb: KnowledgeBase | None = None,
        critic_gateway: Gateway | None = None,
        scorer: SimilarityScorer = DEFAULT_SCORER,
    ) -> None:
        self.databases = {k: Path(v) for k, v in databases.items()}
        self.gateway = gateway
        self.config = config or PipelineConfig()
        self.kb = kb or KnowledgeBase()
        self.critic_gateway = critic_gateway or gateway
        self.scorer = scorer
        self._cards: dict[str, tuple[str, SchemaCard]] = {}
        self._cards_lock = threading.Lock()

    def database_path(self, database_id: str) -> Path:
        try:
            return self.databases[database_id]
        except KeyError:
            raise UnknownDatabase(f"unknown database: {database_id}") from None

    def card(self, database_id: str) -> SchemaCard:
        """Mined card for a database, cached on the file's content hash."""
        path = self.database_path(database_id)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        with self._cards_lock:
            cached = self._cards.get(database_id)
            if cached is not None and cached[0] == digest:
                return cached[1]
        card = mine(path, self.config.mining)
        with self._cards_lock:
            self._cards[database_id] = (digest, card)
        return card

    def _link(
        self, question: str, card: SchemaCard, flags: AblationFlags, prompts: dict[str, str]
    ) -> LinkedSchema:
        if not flags.use_schema_linking:
            return full_schema_link(card)
        prompt = build_linking_prompt(question, card)
        prompts["linking"] = prompt
        try:
            response = self.gateway.complete(CompletionRequest(prompt=prompt))
            ls = parse_linking_response(response, card)
        except (LinkParseError, GatewayError) as exc:
            logger.warning("schema linking degraded to full schema: %s", exc)
            ls = full_schema_link(card)
            ls.warnings.append(f"linking fallback: {exc}")
            return ls
        ls = calibrate_join_relations(ls, card)
        ls = calibrate_similarity_recall(
            question, ls, card, self.scorer, self.config.recall_threshold
        )
        return ls

    def run_query(
        self, question: str, database_id: str, flags: AblationFlags | None = None
    ) -> QueryTrace:
        flags = flags or AblationFlags()
        db_path = self.database_path(database_id)
        prompts: dict[str, str] = {}
        timings: dict[str, float] = {}

        start = time.perf_counter()
        card = apply_flags_to_card(self.card(database_id), flags)
        timings["mine"] = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        ls = self._link(question, card, flags, prompts)
        if not flags.use_cot:
            ls.rationale = ""
        timings["link"] = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        gen_cfg = replace(self.config.generation, style=flags.prompt_style)
        prompts["generation"] = render_prompt(gen_cfg.style, question, ls, card)
        try:
            candidates = self_correct_loop(
                question,
                ls,
                card,
                db_path,
                self.gateway,
                gen_cfg,
                use_constant_fix=flags.use_constant_fix,
                use_execution_check=flags.use_execution_check,
                rewrite_table=self.config.rewrite_table or None,
            )
        except GenerationError as exc:
            logger.warning("generation degraded for %r: %s", question, exc)
            candidates = [SqlCandidate(sql="", executable=False, last_error=str(exc))]
        timings["generate"] = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        if flags.use_critic:
            examples = (
                retrieve_examples(question, card, self.kb, self.config.critic_k, self.scorer)
                if len(self.kb)
                else []
            )
            prompts["critic"] = build_critic_prompt(
                question, ls, candidates, examples, self.config.hints
            )
            verdict = select_best(
                question,
                ls,
                card,
                candidates,
                self.kb,
                self.critic_gateway,
                self.config.critic_k,
                self.config.hints,
                self.scorer,
            )
        else:
            verdict = _fallback(candidates, "<critic bypassed>")
        timings["critic"] = (time.perf_counter() - start) * 1000.0

        start = time.perf_counter()
        chosen_sql = candidates[verdict.chosen_index].sql
        result_rows: list[list[Any]] | None = None
        if chosen_sql.strip():
            outcome = execution_check(chosen_sql, db_path)
            if outcome.ok and outcome.rows is not None:
                result_rows = [list(row) for row in outcome.rows]
        timings["execute"] = (time.perf_counter() - start) * 1000.0

        return QueryTrace(
            question=question,
            linked=ls,
            prompts=prompts,
            candidates=candidates,
            verdict=verdict,
            chosen_sql=chosen_sql,
            result_rows=result_rows,
            timings=timings,
        )
