"""Canonical JSON serialization.

Every artifact the engine writes (schema cards, linked schemas, traces,
reports, KB records) goes through here so golden tests can compare bytes.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize with sorted keys and a trailing newline for stable bytes."""
    return json.dumps(obj, sort_keys=True, indent=indent, ensure_ascii=False) + "\n"


def canonical_line(obj: Any) -> str:
    """One-record-per-line form used by the knowledge-base file."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_canonical(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_dumps(obj))
