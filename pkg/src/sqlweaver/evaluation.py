"""Benchmark ingestion, execution-accuracy scoring, and ablation scenarios.

Datasets arrive in the common benchmark layout: a table-metadata JSON, an
examples JSON of question/SQL pairs, and one SQLite file per database.
Scoring executes predicted and gold SQL and compares result tables, as
multisets unless either query orders its output. The ablation matrix runs
thirteen fixed scenarios and reports each one's accuracy and its delta
against the full system.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .critic import KnowledgeBase
from .errors import IngestionError
from .gateway import Gateway
from .generation import PromptStyle, execution_check
from .pipeline import AblationFlags, Engine, PipelineConfig
from .sqltext import has_top_level_order_by

logger = logging.getLogger(__name__)

NUMERIC_TOLERANCE_DECIMALS = 6
ITEM_TIMEOUT_S = 30.0

EXAMPLE_FILE_NAMES = ("examples.json", "dev.json", "train.json", "train_spider.json")


@dataclass
class BenchmarkItem:
    question: str
    database_id: str
    gold_sql: str

    def to_dict(self) -> dict[str, str]:
        return {"question": self.question, "database_id": self.database_id, "gold_sql": self.gold_sql}


@dataclass
class SpiderDataset:
    items: list[BenchmarkItem]
    databases: dict[str, Path]
    diagnostics: list[str] = field(default_factory=list)


def load_spider(directory: str | Path) -> SpiderDataset:
    """Load a benchmark directory; malformed records are skipped, not fatal."""
    root = Path(directory)
    tables_path = root / "tables.json"
    if not tables_path.exists():
        raise IngestionError(f"missing table-metadata file: {tables_path}")
    try:
        json.loads(tables_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestionError(f"unreadable table-metadata file: {exc}") from exc

    examples_path = next((root / n for n in EXAMPLE_FILE_NAMES if (root / n).exists()), None)
    if examples_path is None:
        raise IngestionError(f"no examples file found in {root} (tried {', '.join(EXAMPLE_FILE_NAMES)})")
    records = json.loads(examples_path.read_text(encoding="utf-8"))

    databases: dict[str, Path] = {}
    db_root = root / "database"
    if db_root.is_dir():
        for db_dir in sorted(db_root.iterdir()):
            for candidate in (db_dir / f"{db_dir.name}.sqlite", db_dir / f"{db_dir.name}.db"):
                if candidate.exists():
                    databases[db_dir.name] = candidate
                    break

    items: list[BenchmarkItem] = []
    diagnostics: list[str] = []
    for i, record in enumerate(records):
        question = record.get("question")
        db_id = record.get("db_id") or record.get("database_id")
        gold = record.get("query") or record.get("gold_sql")
        if not question or not db_id or not gold:
            diagnostics.append(f"record {i}: malformed, skipped")
            continue
        if db_id not in databases:
            diagnostics.append(f"record {i}: database {db_id!r} not found, skipped")
            continue
        items.append(BenchmarkItem(question=question, database_id=db_id, gold_sql=gold))
    logger.info("loaded %d benchmark items from %s (%d skipped)", len(items), root, len(diagnostics))
    return SpiderDataset(items=items, databases=databases, diagnostics=diagnostics)


# --- result comparison ----------------------------------------------------------


def _canonical_value(value: Any) -> Any:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        rounded = round(value, NUMERIC_TOLERANCE_DECIMALS)
        if rounded == int(rounded):
            return int(rounded)
        return rounded
    return value


def _canonical_row(row: Any) -> tuple:
    return tuple(_canonical_value(v) for v in row)


def results_equal(a: list, b: list, order_sensitive: bool) -> bool:
    """Result-table equality: sequences when ordered, multisets otherwise.

    Numeric values are compared on a 1e-6 grid (so the relation stays a true
    equivalence); text is compared exactly; columns align by position.
    """
    rows_a = [_canonical_row(r) for r in a]
    rows_b = [_canonical_row(r) for r in b]
    if order_sensitive:
        return rows_a == rows_b
    return sorted(rows_a, key=repr) == sorted(rows_b, key=repr)


def score_item(item: BenchmarkItem, predicted_sql: str, db: str | Path) -> dict[str, Any]:
    """Execute both queries and classify: match, wrong_result, or execution_error."""
    gold = execution_check(item.gold_sql, db)
    if not gold.ok:
        raise ValueError(f"gold SQL fails on {item.database_id}: {gold.error}")
    predicted = execution_check(predicted_sql, db) if predicted_sql.strip() else None
    if predicted is None or not predicted.ok:
        return {"match": False, "failure_kind": "execution_error"}
    order_sensitive = has_top_level_order_by(predicted_sql) or has_top_level_order_by(item.gold_sql)
    if results_equal(predicted.rows or [], gold.rows or [], order_sensitive):
        return {"match": True, "failure_kind": None}
    return {"match": False, "failure_kind": "wrong_result"}


# --- scenarios --------------------------------------------------------------------


@dataclass
class EvalReport:
    scenario: str
    total: int
    correct: int
    accuracy: float
    per_item: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_item": self.per_item,
        }


def run_scenario(
    dataset: SpiderDataset,
    flags: AblationFlags,
    config: PipelineConfig,
    gateway: Gateway,
    scenario: str = "custom",
    kb: KnowledgeBase | None = None,
    critic_gateway: Gateway | None = None,
    parallelism: int = 1,
    item_timeout: float = ITEM_TIMEOUT_S,
) -> EvalReport:
    """Run the pipeline over every item with the given feature flags."""
    engine = Engine(
        databases=dataset.databases,
        gateway=gateway,
        config=config,
        kb=kb,
        critic_gateway=critic_gateway,
    )

    def evaluate(item: BenchmarkItem) -> dict[str, Any]:
        trace = engine.run_query(item.question, item.database_id, flags)
        outcome = score_item(item, trace.chosen_sql, dataset.databases[item.database_id])
        return {
            "item": item.to_dict(),
            "predicted_sql": trace.chosen_sql,
            "match": outcome["match"],
            "failure_kind": outcome["failure_kind"],
        }

    per_item: list[dict[str, Any]] = []
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = [pool.submit(evaluate, item) for item in dataset.items]
        for item, future in zip(dataset.items, futures):
            try:
                per_item.append(future.result(timeout=item_timeout))
            except FutureTimeout:
                per_item.append(
                    {
                        "item": item.to_dict(),
                        "predicted_sql": "",
                        "match": False,
                        "failure_kind": "execution_error",
                    }
                )
    total = len(per_item)
    correct = sum(1 for r in per_item if r["match"])
    return EvalReport(
        scenario=scenario,
        total=total,
        correct=correct,
        accuracy=(correct / total) if total else 0.0,
        per_item=per_item,
    )


def ablation_scenarios() -> list[tuple[str, AblationFlags, bool]]:
    """(label, flags, uses_alternate_critic_gateway) for the 13 fixed rows."""
    return [
        ("SQLfuse", AblationFlags(), False),
        ("wo Primary KEY", AblationFlags(use_primary_key=False), False),
        ("wo Foreign KEY", AblationFlags(use_foreign_key=False), False),
        ("wo One-to-Many Relation", AblationFlags(use_one_to_many=False), False),
        ("wo Enum Values", AblationFlags(use_enums=False), False),
        ("wo Schema Linking", AblationFlags(use_schema_linking=False), False),
        ("wo CoT", AblationFlags(use_cot=False), False),
        ("Code Representation Style", AblationFlags(prompt_style=PromptStyle.CODE), False),
        ("Natual Description Style", AblationFlags(prompt_style=PromptStyle.NATURAL), False),
        ("wo Constant Value Fix", AblationFlags(use_constant_fix=False), False),
        ("wo SQL Execution Checking", AblationFlags(use_execution_check=False), False),
        ("wo Critic Module", AblationFlags(use_critic=False), False),
        ("Critic Module (GPT-4)", AblationFlags(), True),
    ]


def ablation_matrix(
    dataset: SpiderDataset,
    gateway: Gateway,
    config: PipelineConfig | None = None,
    kb: KnowledgeBase | None = None,
    critic_gateway: Gateway | None = None,
    parallelism: int = 1,
) -> list[EvalReport]:
    """All 13 scenario reports; the full system comes first."""
    config = config or PipelineConfig()
    reports = []
    for label, flags, alternate_critic in ablation_scenarios():
        reports.append(
            run_scenario(
                dataset,
                flags,
                config,
                gateway,
                scenario=label,
                kb=kb,
                critic_gateway=critic_gateway if alternate_critic else None,
                parallelism=parallelism,
            )
        )
    return reports


def matrix_rows(reports: list[EvalReport]) -> list[dict[str, Any]]:
    """Summary rows with the delta-vs-full-system column."""
    if not reports:
        return []
    full = reports[0].accuracy
    return [
        {
            "scenario": r.scenario,
            "total": r.total,
            "correct": r.correct,
            "accuracy": round(r.accuracy, 6),
            "delta_vs_full": round(r.accuracy - full, 6),
        }
        for r in reports
    ]


def matrix_csv(reports: list[EvalReport]) -> str:
    import csv
    import io

    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=["scenario", "total", "correct", "accuracy", "delta_vs_full"]
    )
    writer.writeheader()
    for row in matrix_rows(reports):
        writer.writerow(row)
    return buffer.getvalue()
