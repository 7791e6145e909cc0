"""Uniform completion interface to language models.

Two backends share one ``complete`` contract: a remote HTTP backend speaking
the common chat-completion JSON shape, and a scripted backend that replays
canned responses matched against the prompt. The scripted backend is what
makes the whole pipeline testable without any model.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx

from .errors import GatewayTimeout, GatewayUnavailable, ScriptedMiss

logger = logging.getLogger(__name__)

DEFAULT_DEADLINE_S = 60.0
MAX_RETRIES = 3


@dataclass
class CompletionRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.0
    stop: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass
class TranscriptEntry:
    request: CompletionRequest
    response: str
    backend: str
    latency_ms: float


class Gateway(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


class RecordingMixin:
    """Linearizable transcript shared by both backends."""

    def __init__(self, record: bool) -> None:
        self._record = record
        self._transcript: list[TranscriptEntry] = []
        self._lock = threading.Lock()

    def _log(self, request: CompletionRequest, response: str, backend: str, started: float) -> None:
        if not self._record:
            return
        entry = TranscriptEntry(request, response, backend, (time.perf_counter() - started) * 1000.0)
        with self._lock:
            self._transcript.append(entry)

    def transcript(self) -> list[TranscriptEntry]:
        with self._lock:
            return list(self._transcript)


@dataclass
class ScriptedRule:
    matcher: str
    response: str
    max_uses: int | None = None
    regex: bool = False

    def __post_init__(self) -> None:
        self._pattern = re.compile(self.matcher, re.S) if self.regex else None
        self._uses = 0

    def matches(self, prompt: str) -> bool:
        if self.max_uses is not None and self._uses >= self.max_uses:
            return False
        if self._pattern is not None:
            return self._pattern.search(prompt) is not None
        return self.matcher in prompt

    def consume(self) -> str:
        self._uses += 1
        return self.response


class ScriptedGateway(RecordingMixin):
    """Deterministic backend: first matching rule wins, in order."""

    def __init__(self, rules: list[ScriptedRule], record: bool = True) -> None:
        super().__init__(record)
        self.rules = list(rules)

    def complete(self, request: CompletionRequest) -> str:
        started = time.perf_counter()
        with self._lock:
            for rule in self.rules:
                if rule.matches(request.prompt):
                    response = rule.consume()
                    break
            else:
                raise ScriptedMiss(
                    f"no scripted rule matches prompt starting {request.prompt[:80]!r}"
                )
        self._log(request, response, "scripted", started)
        return response


class RemoteGateway(RecordingMixin):
    """HTTP backend posting a minimal chat-completion request body."""

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        model: str = "",
        timeout: float = DEFAULT_DEADLINE_S,
        record: bool = False,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        super().__init__(record)
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def _body(self, request: CompletionRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.stop:
            body["stop"] = request.stop
        return body

    def complete(self, request: CompletionRequest) -> str:
        started = time.perf_counter()
        last_error: Exception | None = None
        for attempt in range(MAX_RETRIES + 1):
            if attempt:
                time.sleep(min(2.0 ** (attempt - 1) * 0.25, 2.0))
            try:
                response = self._client.post(self.endpoint, json=self._body(request))
            except httpx.TimeoutException as exc:
                raise GatewayTimeout(f"deadline exceeded calling {self.endpoint}: {exc}") from exc
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("transient transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = GatewayUnavailable(f"server error {response.status_code}")
                logger.warning("transient server failure (attempt %d): %s", attempt + 1, response.status_code)
                continue
            if response.status_code >= 400:
                # client errors are never retried
                raise GatewayUnavailable(
                    f"request rejected ({response.status_code}): {response.text[:200]}"
                )
            text = self._extract(response)
            self._log(request, text, "remote", started)
            return text
        raise GatewayUnavailable(f"exhausted retries calling {self.endpoint}: {last_error}")

    @staticmethod
    def _extract(response: httpx.Response) -> str:
        data = response.json()
        choices = data.get("choices") or []
        if choices:
            first = choices[0]
            message = first.get("message") or {}
            if "content" in message:
                return message["content"] or ""
            if "text" in first:
                return first["text"] or ""
        raise GatewayUnavailable(f"unrecognized completion payload: {str(data)[:200]}")

    def close(self) -> None:
        self._client.close()


def load_scripted_rules(path: str | Path) -> list[ScriptedRule]:
    """Scripted rules from a JSON file: a list of rule objects."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    rules = []
    for item in data:
        rules.append(
            ScriptedRule(
                matcher=item["matcher"],
                response=item["response"],
                max_uses=item.get("max_uses"),
                regex=bool(item.get("regex", False)),
            )
        )
    return rules


def gateway_from_config(cfg: dict[str, Any], record: bool = True):
    """Build a gateway from a config mapping (see README for keys)."""
    backend = cfg.get("backend", "scripted")
    if backend == "scripted":
        if "rules_path" in cfg:
            rules = load_scripted_rules(cfg["rules_path"])
        else:
            rules = [
                ScriptedRule(
                    matcher=r["matcher"],
                    response=r["response"],
                    max_uses=r.get("max_uses"),
                    regex=bool(r.get("regex", False)),
                )
                for r in cfg.get("rules", [])
            ]
        return ScriptedGateway(rules, record=record)
    if backend == "remote":
        return RemoteGateway(
            endpoint=cfg["endpoint"],
            api_key=cfg.get("api_key", ""),
            model=cfg.get("model", ""),
            timeout=float(cfg.get("timeout", DEFAULT_DEADLINE_S)),
            record=record,
        )
    raise ValueError(f"unknown gateway backend: {backend}")
