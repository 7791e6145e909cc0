"""Command-line entry points: mine, link, gen, critic, kb, eval, serve, repl."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from .canonjson import canonical_dumps
from .config import (
    ServiceConfig,
    build_gateway,
    discover_databases,
    load_service_config,
    parse_config_file,
)
from .critic import KnowledgeBase, kb_ingest, retrieve_examples, select_best
from .errors import SqlWeaverError
from .evaluation import (
    ablation_matrix,
    ablation_scenarios,
    load_spider,
    matrix_csv,
    matrix_rows,
    run_scenario,
)
from .gateway import ScriptedGateway
from .generation import GenConfig, PromptStyle, SqlCandidate
from .linking import build_linking_prompt, calibrate_join_relations, calibrate_similarity_recall, full_schema_link, parse_linking_response
from .mining import MiningConfig, mine
from .pipeline import AblationFlags, Engine, PipelineConfig

logger = logging.getLogger(__name__)


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_gateway(path: str | None):
    if path is None:
        return ScriptedGateway([])
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, list):
        data = {"backend": "scripted", "rules": data}
    return build_gateway(data)


def _mining_config(args: argparse.Namespace) -> MiningConfig:
    if getattr(args, "config", None):
        data = parse_config_file(args.config).get("mining", {})
        kwargs = {k: v for k, v in data.items() if k in MiningConfig.__dataclass_fields__}
        return MiningConfig(**kwargs)
    return MiningConfig()


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig(mining=_mining_config(args))
    if getattr(args, "config", None):
        data = parse_config_file(args.config)
        gen = {k: v for k, v in data.get("generation", {}).items() if k in GenConfig.__dataclass_fields__}
        if gen:
            cfg = replace(cfg, generation=GenConfig(**gen))
        if "recall_threshold" in data:
            cfg = replace(cfg, recall_threshold=float(data["recall_threshold"]))
    return cfg


# --- subcommands ---------------------------------------------------------------


def cmd_mine(args: argparse.Namespace) -> int:
    card = mine(args.db_path, _mining_config(args))
    _write_output(canonical_dumps(card.to_dict()), args.out)
    return 0


def cmd_link(args: argparse.Namespace) -> int:
    card = mine(args.db, _mining_config(args))
    gateway = _load_gateway(args.gateway)
    prompt = build_linking_prompt(args.question, card)
    if args.print_prompt:
        _write_output(prompt, args.out)
        return 0
    from .gateway import CompletionRequest

    try:
        response = gateway.complete(CompletionRequest(prompt=prompt))
        ls = parse_linking_response(response, card)
        ls = calibrate_join_relations(ls, card)
        ls = calibrate_similarity_recall(args.question, ls, card)
    except SqlWeaverError as exc:
        logger.warning("linking degraded to full schema: %s", exc)
        ls = full_schema_link(card)
    _write_output(canonical_dumps(ls.to_dict()), args.out)
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    engine = Engine(
        databases={Path(args.db).stem: args.db},
        gateway=_load_gateway(args.gateway),
        config=_pipeline_config(args),
    )
    flags = AblationFlags(prompt_style=PromptStyle(args.style))
    trace = engine.run_query(args.question, Path(args.db).stem, flags)
    _write_output(canonical_dumps([c.to_dict() for c in trace.candidates]), args.out)
    return 0


def cmd_critic(args: argparse.Namespace) -> int:
    card = mine(args.db, _mining_config(args))
    kb = KnowledgeBase(args.kb) if args.kb else KnowledgeBase()
    candidates = [SqlCandidate(sql=s) for s in args.candidate]
    verdict = select_best(
        args.question,
        full_schema_link(card),
        card,
        candidates,
        kb,
        _load_gateway(args.gateway),
    )
    _write_output(canonical_dumps(verdict.to_dict()), args.out)
    return 0


def cmd_kb(args: argparse.Namespace) -> int:
    kb = KnowledgeBase(args.kb)
    if args.kb_command == "list":
        _write_output(canonical_dumps([e.to_dict() for e in kb.entries]), args.out)
        return 0
    card = mine(args.card_db, _mining_config(args))
    if args.kb_command == "ingest":
        entries = json.loads(Path(args.entries).read_text(encoding="utf-8"))
        gateway = _load_gateway(args.gateway) if args.gateway else None
        added, diagnostics = kb_ingest(kb, entries, card, gateway=gateway, db=args.db)
        _write_output(canonical_dumps({"added": added, "rejected": diagnostics}), args.out)
        return 0
    if args.kb_command == "retrieve":
        entries = retrieve_examples(args.question, card, kb, k=args.k)
        _write_output(canonical_dumps([e.to_dict() for e in entries]), args.out)
        return 0
    raise SystemExit(f"unknown kb command: {args.kb_command}")


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = load_spider(args.dataset)
    gateway = _load_gateway(args.gateway)
    critic_gateway = _load_gateway(args.critic_gateway) if args.critic_gateway else None
    config = _pipeline_config(args)
    kb = KnowledgeBase(args.kb) if args.kb else None

    def wrap(payload: Any) -> dict[str, Any]:
        # thresholds travel with every report so runs are comparable
        return {
            "config": {
                "mining": config.mining.__dict__,
                "generation": {**config.generation.__dict__, "style": config.generation.style.value},
                "recall_threshold": config.recall_threshold,
            },
            "dataset": str(args.dataset),
            "reports": payload,
        }

    if args.matrix:
        reports = ablation_matrix(
            dataset, gateway, config, kb=kb, critic_gateway=critic_gateway, parallelism=args.parallelism
        )
        rows = matrix_rows(reports)
        out_dir = Path(args.out) if args.out else None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "matrix.json").write_text(
                canonical_dumps(wrap([r.to_dict() for r in reports])), encoding="utf-8"
            )
            (out_dir / "matrix.csv").write_text(matrix_csv(reports), encoding="utf-8")
        for row in rows:
            sys.stdout.write(
                f"{row['scenario']:<28} accuracy={row['accuracy']:.3f} delta={row['delta_vs_full']:+.3f}\n"
            )
        return 0

    label = args.scenario or "SQLfuse"
    scenario = next((s for s in ablation_scenarios() if s[0] == label), None)
    if scenario is None:
        raise SystemExit(f"unknown scenario {label!r}; known: " + ", ".join(s[0] for s in ablation_scenarios()))
    _label, flags, alternate = scenario
    report = run_scenario(
        dataset,
        flags,
        config,
        gateway,
        scenario=label,
        kb=kb,
        critic_gateway=critic_gateway if alternate else None,
        parallelism=args.parallelism,
    )
    payload = canonical_dumps(wrap(report.to_dict()))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(payload, encoding="utf-8")
    sys.stdout.write(f"{label}: accuracy={report.accuracy:.3f} ({report.correct}/{report.total})\n")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    cfg = load_service_config(args.config) if args.config else ServiceConfig()
    serve(cfg)
    return 0


def _format_rows(rows: list[list[Any]] | None) -> str:
    if rows is None:
        return "(not executed)"
    if not rows:
        return "(empty result)"
    rendered = [[("NULL" if v is None else str(v)) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in rendered) for i in range(len(rendered[0]))]
    lines = ["  ".join(value.ljust(width) for value, width in zip(row, widths)) for row in rendered]
    return "\n".join(lines)


def cmd_repl(args: argparse.Namespace) -> int:
    databases = discover_databases(args.database_dir) if args.database_dir else {}
    if args.db:
        databases[Path(args.db).stem] = Path(args.db)
    if not databases:
        raise SystemExit("no databases found; pass --db or --database-dir")
    database_id = args.database_id or sorted(databases)[0]
    engine = Engine(databases=databases, gateway=_load_gateway(args.gateway), config=_pipeline_config(args))
    flags = AblationFlags()
    last_trace = None
    stream = sys.stdin

    sys.stdout.write(f"connected to {database_id}; \\trace shows the last trace, \\flags toggles features\n")
    while True:
        sys.stdout.write("> ")
        sys.stdout.flush()
        line = stream.readline()
        if not line:
            sys.stdout.write("\n")
            return 0
        line = line.strip()
        if not line:
            continue
        if line.startswith("\\trace"):
            sys.stdout.write(canonical_dumps(last_trace.to_dict()) if last_trace else "(no trace yet)\n")
            continue
        if line.startswith("\\flags"):
            parts = line.split()
            if len(parts) == 3 and parts[1] in flags.to_dict():
                setattr(flags, parts[1], parts[2].lower() in ("on", "true", "1"))
                sys.stdout.write(f"{parts[1]} = {getattr(flags, parts[1])}\n")
            else:
                sys.stdout.write(canonical_dumps(flags.to_dict()))
            continue
        try:
            last_trace = engine.run_query(line, database_id, flags)
        except SqlWeaverError as exc:
            sys.stdout.write(f"error: {exc}\n")
            continue
        repairs = [r for c in last_trace.candidates for r in c.repairs]
        sys.stdout.write(f"SQL: {last_trace.chosen_sql}\n")
        sys.stdout.write(_format_rows(last_trace.result_rows) + "\n")
        summary = f"{len(repairs)} repair(s)" if repairs else "no repairs"
        sys.stdout.write(f"[{last_trace.verdict.method}] {summary}\n")


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key/value config file", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="sqlweaver", description="Text-to-SQL orchestration engine", parents=[common]
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    def add_parser(name: str, **kwargs) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("mine", help="mine a database into a schema card")
    p.add_argument("db_path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mine)

    p = add_parser("link", help="link a question to schema items")
    p.add_argument("--db", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--gateway")
    p.add_argument("--print-prompt", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_link)

    p = add_parser("gen", help="generate SQL candidates for a question")
    p.add_argument("--db", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--style", default=PromptStyle.SQLFUSE.value, choices=[s.value for s in PromptStyle])
    p.add_argument("--gateway")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = add_parser("critic", help="rank candidate SQL queries")
    p.add_argument("--db", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--candidate", action="append", required=True)
    p.add_argument("--gateway")
    p.add_argument("--kb")
    p.add_argument("--out")
    p.set_defaults(func=cmd_critic)

    p = add_parser("kb", help="knowledge-base operations")
    p.add_argument("kb_command", choices=["ingest", "list", "retrieve"])
    p.add_argument("--kb", required=True)
    p.add_argument("--card-db", help="database whose schema masks skeletons")
    p.add_argument("--entries", help="JSON file of entries to ingest")
    p.add_argument("--db", help="database to validate good answers against")
    p.add_argument("--question")
    p.add_argument("-k", type=int, default=3)
    p.add_argument("--gateway")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kb)

    p = add_parser("eval", help="run benchmark scenarios")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scenario")
    p.add_argument("--matrix", action="store_true")
    p.add_argument("--gateway")
    p.add_argument("--critic-gateway")
    p.add_argument("--kb")
    p.add_argument("--out")
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = add_parser("serve", help="run the HTTP service")
    p.set_defaults(func=cmd_serve)

    p = add_parser("repl", help="interactive question loop")
    p.add_argument("--db", help="single database file")
    p.add_argument("--database-dir")
    p.add_argument("--database-id")
    p.add_argument("--gateway")
    p.set_defaults(func=cmd_repl)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SqlWeaverError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
