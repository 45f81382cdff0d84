"""Operator entry point: serve the API, seed demo data, run headless
regressions, and compact the store.

Flag precedence: command-line flags override environment variables, which
override built-in defaults. No interactive prompts; regress exits 0 only
when every passed case replays cleanly, 1 on any regression or error
verdict, and 2 for an unknown bot.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .domain import Verdict
from .errors import FixtureFileError, NotFoundError, PromptDeskError
from .gateway import Gateway, GatewayConfig
from .runtime import Runtime
from .scenarios import JudgeMode
from .seed import FIXTURES_FILENAME, seed_demo
from .service import AuthoringService, ServiceConfig
from .store import Store, default_store_path


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-dir", help="store directory (env PD_DATA_DIR, default ./data)")
    parser.add_argument(
        "--fixtures",
        action="append",
        help="fixture file for the scripted provider; repeatable, later files win",
    )
    parser.add_argument(
        "--judge-mode",
        choices=[m.value for m in JudgeMode],
        help="response-equivalence judge (env PD_JUDGE_MODE, default llm)",
    )
    parser.add_argument(
        "--provider",
        choices=["scripted", "auto", "openai", "anthropic", "google"],
        help="completion provider; auto routes by each bot's model choice "
        "(env PD_PROVIDER_DEFAULT, default scripted)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptdesk")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    _add_common_flags(serve)
    serve.add_argument("--bind", help="host:port (env PD_BIND_ADDR, default 127.0.0.1:8080)")

    seed = sub.add_parser("seed", help="create the demo bot, test cases, and fixtures")
    _add_common_flags(seed)

    regress = sub.add_parser("regress", help="replay all passed cases for a bot")
    regress.add_argument("bot_id")
    _add_common_flags(regress)

    compact = sub.add_parser("compact", help="rewrite the store log")
    _add_common_flags(compact)

    return parser


def resolve_data_dir(args: argparse.Namespace) -> Path:
    return Path(args.data_dir or os.environ.get("PD_DATA_DIR") or "./data")


def build_service(args: argparse.Namespace) -> AuthoringService:
    data_dir = resolve_data_dir(args)
    env_config = ServiceConfig.from_env()
    config = ServiceConfig(
        provider=args.provider or env_config.provider,
        judge_mode=JudgeMode(args.judge_mode) if args.judge_mode else env_config.judge_mode,
        bind_addr=getattr(args, "bind", None) or env_config.bind_addr,
    )
    store = Store(default_store_path(data_dir))
    gateway = Gateway(config=GatewayConfig.from_env())
    fixture_paths = [Path(p) for p in (args.fixtures or [])]
    if not fixture_paths:
        default_fixtures = data_dir / FIXTURES_FILENAME
        if default_fixtures.exists():
            fixture_paths = [default_fixtures]
    for path in fixture_paths:
        gateway.fixtures.load_file(path)
    return AuthoringService(store, gateway, config, Runtime())


def cmd_serve(args: argparse.Namespace) -> int:
    from .api import serve as run_server

    service = build_service(args)
    run_server(service, service.config.bind_addr)
    return 0


def cmd_seed(args: argparse.Namespace) -> int:
    service = build_service(args)
    fixtures_path = resolve_data_dir(args) / FIXTURES_FILENAME
    summary = seed_demo(service, fixtures_path)
    state = "created" if summary["created"] else "already present"
    print(f"demo bot {summary['bot_id']} ({state})")
    print(f"test cases: {', '.join(summary['case_ids'])}")
    print(f"fixtures: {summary['fixture_count']} entries in {summary['fixtures_path']}")
    return 0


def _sanitize(text: str) -> str:
    return " ".join(text.split())


def cmd_regress(args: argparse.Namespace) -> int:
    service = build_service(args)
    try:
        report = service.regress(args.bot_id)
    except NotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    failed = False
    for entry in report.evaluated_cases:
        print(f"{entry.test_case_id}\t{entry.verdict.value}\t{_sanitize(entry.rationale)}")
        if entry.verdict != Verdict.PASS:
            failed = True
    return 1 if failed else 0


def cmd_compact(args: argparse.Namespace) -> int:
    service = build_service(args)
    kept = service.store.compact()
    print(f"compacted {service.store.path} ({kept} records kept)")
    return 0


_COMMANDS = {
    "serve": cmd_serve,
    "seed": cmd_seed,
    "regress": cmd_regress,
    "compact": cmd_compact,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FixtureFileError as exc:
        print(f"fixture load failed: {exc}", file=sys.stderr)
        return 2
    except PromptDeskError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
