"""Configuration: a flat TOML-style key/value file plus environment overrides.

The file format is deliberately small: ``key = value`` lines, ``#``
comments, and optional ``[section]`` headers for the mining and generation
sub-configs. Environment variables prefixed ``SQLWEAVER_`` override file
values (for example SQLWEAVER_PORT, SQLWEAVER_GATEWAY_ENDPOINT).
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .gateway import gateway_from_config
from .generation import GenConfig
from .mining import MiningConfig

ENV_PREFIX = "SQLWEAVER_"

_SECTION_RE = re.compile(r"^\[(?P<name>[A-Za-z_][A-Za-z_0-9]*)\]$")
_PAIR_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z_0-9]*)\s*=\s*(?P<value>.+)$")


def _parse_scalar(text: str) -> Any:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Nested dict from a key/value file; sections become sub-dicts."""
    result: dict[str, Any] = {}
    current = result
    for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        section = _SECTION_RE.match(line)
        if section:
            current = result.setdefault(section.group("name"), {})
            continue
        pair = _PAIR_RE.match(line)
        if not pair:
            raise ValueError(f"unparseable config line: {raw_line!r}")
        current[pair.group("key")] = _parse_scalar(pair.group("value"))
    return result


def env_overrides(environ: dict[str, str] | None = None) -> dict[str, Any]:
    env = os.environ if environ is None else environ
    out: dict[str, Any] = {}
    for key, value in env.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX) :].lower()] = _parse_scalar(value)
    return out


@dataclass
class ServiceConfig:
    port: int = 8077
    host: str = "127.0.0.1"
    database_dir: str = "databases"
    kb_path: str | None = None
    gateway: dict[str, Any] = field(default_factory=lambda: {"backend": "scripted", "rules": []})
    critic_gateway: dict[str, Any] | None = None
    mining: MiningConfig = field(default_factory=MiningConfig)
    generation: GenConfig = field(default_factory=GenConfig)
    recall_threshold: float = 0.55


def load_service_config(
    path: str | Path | None = None, environ: dict[str, str] | None = None
) -> ServiceConfig:
    data: dict[str, Any] = {}
    if path is not None:
        data = parse_config_file(path)
    data.update(env_overrides(environ))

    gateway_cfg: dict[str, Any]
    if "gateway_config" in data:
        gateway_cfg = json.loads(Path(data["gateway_config"]).read_text(encoding="utf-8"))
        if isinstance(gateway_cfg, list):
            gateway_cfg = {"backend": "scripted", "rules": gateway_cfg}
    elif "gateway_endpoint" in data:
        gateway_cfg = {
            "backend": "remote",
            "endpoint": data["gateway_endpoint"],
            "api_key": data.get("gateway_api_key", ""),
            "model": data.get("gateway_model", ""),
            "timeout": data.get("gateway_timeout", 60.0),
        }
    else:
        gateway_cfg = {"backend": "scripted", "rules": []}

    mining_kwargs = {
        k: v for k, v in data.get("mining", {}).items() if k in MiningConfig.__dataclass_fields__
    }
    gen_kwargs = {
        k: v for k, v in data.get("generation", {}).items() if k in GenConfig.__dataclass_fields__
    }
    return ServiceConfig(
        port=int(data.get("port", 8077)),
        host=str(data.get("host", "127.0.0.1")),
        database_dir=str(data.get("database_dir", "databases")),
        kb_path=data.get("kb_path"),
        gateway=gateway_cfg,
        mining=MiningConfig(**mining_kwargs),
        generation=GenConfig(**gen_kwargs),
        recall_threshold=float(data.get("recall_threshold", 0.55)),
    )


def discover_databases(directory: str | Path) -> dict[str, Path]:
    """Map database ids to files: either <dir>/<id>.sqlite or the benchmark
    layout <dir>/database/<id>/<id>.sqlite."""
    root = Path(directory)
    found: dict[str, Path] = {}
    if not root.exists():
        return found
    nested = root / "database"
    scan = nested if nested.is_dir() else root
    for entry in sorted(scan.iterdir()):
        if entry.is_file() and entry.suffix in (".sqlite", ".db"):
            found[entry.stem] = entry
        elif entry.is_dir():
            for candidate in (entry / f"{entry.name}.sqlite", entry / f"{entry.name}.db"):
                if candidate.exists():
                    found[entry.name] = candidate
                    break
    return found


def build_gateway(cfg: dict[str, Any]):
    return gateway_from_config(cfg)
