from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import BENCHMARK_ITEMS
from gold_gateway import make_gold_gateway
from sqlweaver.canonjson import canonical_dumps
from sqlweaver.pipeline import Engine
from sqlweaver.service import create_app


@pytest.fixture()
def client(spider_dir: Path, demo_card, library_card) -> TestClient:
    cards = {"demo_db": demo_card, "library": library_card}
    engine = Engine(
        databases={
            "demo_db": spider_dir / "database" / "demo_db" / "demo_db.sqlite",
            "library": spider_dir / "database" / "library" / "library.sqlite",
        },
        gateway=make_gold_gateway(BENCHMARK_ITEMS, cards),
    )
    return TestClient(create_app(engine), raise_server_exceptions=False)


def test_health(client: TestClient):
    response = client.get("/v1/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_databases_listing(client: TestClient):
    assert client.get("/v1/databases").json() == {"databases": ["demo_db", "library"]}


def test_schema_endpoint(client: TestClient):
    response = client.get("/v1/schema/demo_db")
    assert response.status_code == 200
    card = response.json()
    assert [t["name"] for t in card["tables"]] == ["singer", "concert", "customer", "orders"]


def test_schema_unknown_database(client: TestClient):
    assert client.get("/v1/schema/ghost").status_code == 404


def test_query_end_to_end(client: TestClient):
    response = client.post(
        "/v1/query", json={"question": "How many singers are there?", "database_id": "demo_db"}
    )
    assert response.status_code == 200
    trace = response.json()
    assert trace["chosen_sql"] == "SELECT count(*) FROM singer"
    assert trace["result_rows"] == [[3]]
    assert trace["candidates"][trace["verdict"]["chosen_index"]]["sql"] == trace["chosen_sql"]


def test_query_missing_question_is_client_error(client: TestClient):
    response = client.post("/v1/query", json={"database_id": "demo_db"})
    assert 400 <= response.status_code < 500
    response = client.post("/v1/query", json={"question": "   ", "database_id": "demo_db"})
    assert 400 <= response.status_code < 500


def test_query_unknown_database(client: TestClient):
    response = client.post("/v1/query", json={"question": "q?", "database_id": "ghost"})
    assert response.status_code == 404


def test_query_flags_honored(client: TestClient):
    response = client.post(
        "/v1/query",
        json={
            "question": "How many singers are there?",
            "database_id": "demo_db",
            "flags": {"use_critic": False},
        },
    )
    assert response.json()["verdict"]["method"].startswith("fallback")


def test_query_stateless_minus_timings(client: TestClient):
    body = {"question": "How many singers are there?", "database_id": "demo_db"}
    first = client.post("/v1/query", json=body).json()
    second = client.post("/v1/query", json=body).json()
    first.pop("timings")
    second.pop("timings")
    assert first == second


def test_responses_are_canonical_json(client: TestClient):
    raw = client.get("/v1/schema/demo_db").text
    assert raw == canonical_dumps(json.loads(raw))


def test_kb_ingest_endpoint(client: TestClient):
    response = client.post(
        "/v1/kb/ingest",
        json={
            "database_id": "demo_db",
            "validate_on_database": True,
            "entries": [
                {"question": "How many singers exist?", "good_answer": "SELECT count(*) FROM singer"},
                {"question": "broken", "good_answer": "SELECT 'oops FROM x"},
            ],
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["added"] == 1
    assert len(body["rejected"]) == 1
