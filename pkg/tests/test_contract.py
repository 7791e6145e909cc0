from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from conftest import BENCHMARK_ITEMS
from gold_gateway import make_gold_gateway
from sqlweaver.canonjson import canonical_dumps
from sqlweaver.mining import mine
from sqlweaver.pipeline import AblationFlags, Engine

SCHEMA_PATH = Path(__file__).parent.parent / "contract" / "query_trace.schema.json"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def trace_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def engine(spider_dir: Path, demo_card, library_card) -> Engine:
    cards = {"demo_db": demo_card, "library": library_card}
    return Engine(
        databases={
            "demo_db": spider_dir / "database" / "demo_db" / "demo_db.sqlite",
            "library": spider_dir / "database" / "library" / "library.sqlite",
        },
        gateway=make_gold_gateway(BENCHMARK_ITEMS, cards),
    )


def test_traces_validate_against_contract(engine: Engine, trace_schema: dict):
    for db_id, question, _gold in BENCHMARK_ITEMS[:6]:
        trace = engine.run_query(question, db_id)
        jsonschema.validate(trace.to_dict(), trace_schema)


def test_degraded_trace_validates(engine: Engine, trace_schema: dict):
    trace = engine.run_query(
        "How many singers are there?", "demo_db", AblationFlags(use_critic=False)
    )
    jsonschema.validate(trace.to_dict(), trace_schema)


def test_schema_card_golden(demo_db: Path):
    from conftest import ENUM_CFG

    card = mine(demo_db, ENUM_CFG)
    rendered = canonical_dumps(card.to_dict())
    expected = (GOLDEN / "schema_card_demo.json").read_text(encoding="utf-8")
    assert rendered == expected
