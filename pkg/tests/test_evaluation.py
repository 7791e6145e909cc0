from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from conftest import BENCHMARK_ITEMS
from gold_gateway import make_gold_gateway
from sqlweaver.errors import IngestionError
from sqlweaver.evaluation import (
    BenchmarkItem,
    EvalReport,
    ablation_matrix,
    ablation_scenarios,
    load_spider,
    matrix_csv,
    matrix_rows,
    results_equal,
    run_scenario,
    score_item,
)
from sqlweaver.gateway import ScriptedGateway, ScriptedRule
from sqlweaver.pipeline import AblationFlags, PipelineConfig


def test_load_spider_counts(spider_dir: Path):
    dataset = load_spider(spider_dir)
    assert len(dataset.items) == 20
    assert set(dataset.databases) == {"demo_db", "library"}
    assert dataset.diagnostics == []


def test_load_spider_missing_metadata(tmp_path: Path):
    with pytest.raises(IngestionError):
        load_spider(tmp_path)


def test_load_spider_skips_malformed_and_unresolvable(spider_dir: Path, tmp_path: Path):
    root = tmp_path / "ds"
    root.mkdir()
    (root / "tables.json").write_text("[]", encoding="utf-8")
    (root / "database").mkdir()
    src = spider_dir / "database" / "demo_db"
    dst = root / "database" / "demo_db"
    dst.mkdir()
    (dst / "demo_db.sqlite").write_bytes((src / "demo_db.sqlite").read_bytes())
    examples = [
        {"db_id": "demo_db", "question": "ok?", "query": "SELECT 1"},
        {"db_id": "demo_db", "question": "", "query": "SELECT 1"},
        {"db_id": "missing_db", "question": "where?", "query": "SELECT 1"},
        {"question": "no db", "query": "SELECT 1"},
    ]
    (root / "examples.json").write_text(json.dumps(examples), encoding="utf-8")
    dataset = load_spider(root)
    assert len(dataset.items) == 1
    assert len(dataset.diagnostics) == 3


# --- results_equal ---------------------------------------------------------------


def test_results_equal_identity_and_permutation():
    table = [(1, "a"), (2, "b"), (3, "c")]
    assert results_equal(table, table, order_sensitive=True)
    permuted = [table[2], table[0], table[1]]
    assert results_equal(table, permuted, order_sensitive=False)
    assert not results_equal(table, permuted, order_sensitive=True)


def test_results_equal_numeric_tolerance():
    assert results_equal([(1.0000001,)], [(1.0,)], order_sensitive=True)
    assert results_equal([(3,)], [(3.0,)], order_sensitive=True)
    assert not results_equal([(1.001,)], [(1.0,)], order_sensitive=True)
    assert not results_equal([("1",)], [(1,)], order_sensitive=True)


def random_table(rng: random.Random) -> list[tuple]:
    n_cols = rng.randint(1, 3)
    n_rows = rng.randint(0, 5)

    def cell():
        kind = rng.randint(0, 2)
        if kind == 0:
            return rng.randint(-5, 5)
        if kind == 1:
            return round(rng.uniform(-2, 2), 3)
        return rng.choice(["x", "y", "z", None])

    return [tuple(cell() for _ in range(n_cols)) for _ in range(n_rows)]


def test_results_equal_is_equivalence_relation():
    rng = random.Random(42)
    tables = [random_table(rng) for _ in range(200)]
    for t in tables:
        assert results_equal(t, t, order_sensitive=False)  # reflexive
    for _ in range(200):
        a, b = rng.choice(tables), rng.choice(tables)
        assert results_equal(a, b, False) == results_equal(b, a, False)  # symmetric
    for _ in range(200):
        a = rng.choice(tables)
        b = [tuple(v + 1e-9 if isinstance(v, float) else v for v in row) for row in a]
        c = list(reversed(a))
        if results_equal(a, b, False) and results_equal(b, c, False):
            assert results_equal(a, c, False)  # transitive


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.text(max_size=2)), max_size=6), st.randoms())
def test_results_equal_permutation_property(rows, rng):
    shuffled = list(rows)
    rng.shuffle(shuffled)
    assert results_equal(rows, shuffled, order_sensitive=False)


# --- score_item -------------------------------------------------------------------


@pytest.fixture()
def demo_item(spider_dir) -> tuple[BenchmarkItem, Path]:
    item = BenchmarkItem(
        question="How many singers are there?", database_id="demo_db",
        gold_sql="SELECT count(*) FROM singer",
    )
    return item, spider_dir / "database" / "demo_db" / "demo_db.sqlite"


def test_score_item_gold_matches_itself(demo_item):
    item, db = demo_item
    assert score_item(item, item.gold_sql, db) == {"match": True, "failure_kind": None}


def test_score_item_wrong_result(demo_item):
    item, db = demo_item
    outcome = score_item(item, "SELECT count(*) FROM concert WHERE singer_id = 1", db)
    assert outcome == {"match": False, "failure_kind": "wrong_result"}


def test_score_item_execution_error(demo_item):
    item, db = demo_item
    outcome = score_item(item, "SELECT definitely broken (", db)
    assert outcome == {"match": False, "failure_kind": "execution_error"}


def test_score_item_order_sensitivity(spider_dir):
    db = spider_dir / "database" / "demo_db" / "demo_db.sqlite"
    item = BenchmarkItem(
        question="names by age",
        database_id="demo_db",
        gold_sql="SELECT name FROM singer ORDER BY age",
    )
    # same rows, wrong order: Bo(25), Ann(30), Ann(40) vs reversed
    outcome = score_item(item, "SELECT name FROM singer ORDER BY age DESC", db)
    assert outcome["match"] is False


# --- scenarios ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def gold_gateway_factory(demo_card, library_card):
    cards = {"demo_db": demo_card, "library": library_card}

    def factory():
        return make_gold_gateway(BENCHMARK_ITEMS, cards)

    return factory


def test_run_scenario_gold_echo_perfect(spider_dir, gold_gateway_factory):
    dataset = load_spider(spider_dir)
    report = run_scenario(
        dataset, AblationFlags(), PipelineConfig(), gold_gateway_factory(), scenario="full"
    )
    assert report.total == 20
    assert report.correct == 20
    assert report.accuracy == 1.0


def test_run_scenario_planted_failures(spider_dir, demo_card, library_card):
    dataset = load_spider(spider_dir)
    cards = {"demo_db": demo_card, "library": library_card}
    wrong = {
        BENCHMARK_ITEMS[0][1]: "SELECT count(*) FROM customer",
        BENCHMARK_ITEMS[3][1]: "SELECT count(*) FROM customer",
        BENCHMARK_ITEMS[12][1]: "SELECT count(*) FROM author",
        BENCHMARK_ITEMS[18][1]: "SELECT count(*) FROM book",
    }
    planted = [
        (db, q, wrong.get(q, gold)) for db, q, gold in BENCHMARK_ITEMS
    ]
    gateway = make_gold_gateway(planted, cards)
    report = run_scenario(dataset, AblationFlags(), PipelineConfig(), gateway, scenario="planted")
    assert report.total == 20
    assert report.accuracy == pytest.approx(0.8)
    failed = [r for r in report.per_item if not r["match"]]
    assert len(failed) == 4
    assert all(r["failure_kind"] == "wrong_result" for r in failed)


def test_run_scenario_empty_items(spider_dir, gold_gateway_factory):
    dataset = load_spider(spider_dir)
    dataset.items = []
    report = run_scenario(dataset, AblationFlags(), PipelineConfig(), gold_gateway_factory())
    assert report.total == 0 and report.accuracy == 0.0


def test_ablation_scenario_labels():
    labels = [label for label, _flags, _alt in ablation_scenarios()]
    assert labels == [
        "SQLfuse",
        "wo Primary KEY",
        "wo Foreign KEY",
        "wo One-to-Many Relation",
        "wo Enum Values",
        "wo Schema Linking",
        "wo CoT",
        "Code Representation Style",
        "Natual Description Style",
        "wo Constant Value Fix",
        "wo SQL Execution Checking",
        "wo Critic Module",
        "Critic Module (GPT-4)",
    ]
    assert len(labels) == 13


def test_ablation_matrix_on_fixture(spider_dir, gold_gateway_factory):
    dataset = load_spider(spider_dir)
    reports = ablation_matrix(dataset, gold_gateway_factory(), critic_gateway=gold_gateway_factory())
    assert len(reports) == 13
    assert reports[0].scenario == "SQLfuse"
    rows = matrix_rows(reports)
    assert rows[0]["delta_vs_full"] == 0.0
    # a gold-echo gateway is immune to ablations: every scenario stays perfect
    assert all(r["accuracy"] == 1.0 for r in rows)
    csv_text = matrix_csv(reports)
    assert csv_text.splitlines()[0] == "scenario,total,correct,accuracy,delta_vs_full"
    assert len(csv_text.splitlines()) == 14


def test_ablation_matrix_deterministic(spider_dir, gold_gateway_factory):
    dataset = load_spider(spider_dir)
    first = [r.to_dict() for r in ablation_matrix(dataset, gold_gateway_factory())]
    second = [r.to_dict() for r in ablation_matrix(dataset, gold_gateway_factory())]
    assert first == second
