"""HTTP service exposing the pipeline under /v1.

All responses are canonical key-sorted JSON. Request validation failures
surface as 4xx with a diagnostic; unexpected failures become a 5xx with an
opaque error id whose details go to the server log only.
"""

from __future__ import annotations

import logging
import uuid
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .canonjson import canonical_dumps
from .config import ServiceConfig, build_gateway, discover_databases
from .critic import KnowledgeBase, kb_ingest
from .errors import SqlWeaverError, UnknownDatabase
from .pipeline import AblationFlags, Engine, PipelineConfig

logger = logging.getLogger(__name__)


class QueryBody(BaseModel):
    question: str
    database_id: str
    flags: dict[str, Any] | None = None


class KbEntryBody(BaseModel):
    question: str
    schema_summary: str = ""
    good_answer: str


class KbIngestBody(BaseModel):
    database_id: str
    entries: list[KbEntryBody]
    validate_on_database: bool = False


def _canonical(payload: Any, status_code: int = 200) -> Response:
    return Response(
        content=canonical_dumps(payload),
        status_code=status_code,
        media_type="application/json",
    )


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="sqlweaver", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"detail": exc.errors()})

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.exception("internal error %s on %s", error_id, request.url.path)
        return JSONResponse(status_code=500, content={"error_id": error_id})

    @app.get("/v1/health")
    def health() -> Response:
        return _canonical({"status": "ok", "version": __version__})

    @app.get("/v1/databases")
    def databases() -> Response:
        return _canonical({"databases": sorted(engine.databases)})

    @app.get("/v1/schema/{database_id}")
    def schema(database_id: str) -> Response:
        try:
            card = engine.card(database_id)
        except UnknownDatabase as exc:
            return _canonical({"detail": str(exc)}, status_code=404)
        return _canonical(card.to_dict())

    @app.post("/v1/query")
    def query(body: QueryBody) -> Response:
        if not body.question.strip():
            return _canonical({"detail": "question must be non-empty"}, status_code=422)
        flags = AblationFlags.from_dict(body.flags or {})
        try:
            trace = engine.run_query(body.question, body.database_id, flags)
        except UnknownDatabase as exc:
            return _canonical({"detail": str(exc)}, status_code=404)
        except SqlWeaverError as exc:
            return _canonical({"detail": str(exc)}, status_code=400)
        return _canonical(trace.to_dict())

    @app.post("/v1/kb/ingest")
    def ingest(body: KbIngestBody) -> Response:
        try:
            card = engine.card(body.database_id)
        except UnknownDatabase as exc:
            return _canonical({"detail": str(exc)}, status_code=404)
        db = engine.database_path(body.database_id) if body.validate_on_database else None
        added, diagnostics = kb_ingest(
            engine.kb,
            [e.model_dump() for e in body.entries],
            card,
            db=db,
        )
        return _canonical({"added": added, "rejected": diagnostics})

    return app


def engine_from_config(cfg: ServiceConfig) -> Engine:
    databases = discover_databases(cfg.database_dir)
    gateway = build_gateway(cfg.gateway)
    critic_gateway = build_gateway(cfg.critic_gateway) if cfg.critic_gateway else None
    kb = KnowledgeBase(cfg.kb_path) if cfg.kb_path else KnowledgeBase()
    return Engine(
        databases=databases,
        gateway=gateway,
        config=PipelineConfig(
            mining=cfg.mining,
            generation=cfg.generation,
            recall_threshold=cfg.recall_threshold,
        ),
        kb=kb,
        critic_gateway=critic_gateway,
    )


def serve(cfg: ServiceConfig) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    app = create_app(engine_from_config(cfg))
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
