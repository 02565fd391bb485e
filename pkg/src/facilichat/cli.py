"""Command-line entry points: serve, simulate, analyze, replay, gen-config.

Exit codes: 0 on success, 1 on runtime failure, 2 on bad flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import InvalidConfigError, Profile, SessionConfig, TopicInputs, derive_config
from .llm import build_provider, load_script_file
from .metrics import MetricsError, analyze_logs
from .persistence import load_session
from .pipeline import replay_session
from .simulator import (
    DEFAULT_SNIPPETS,
    ChatSnippet,
    SimulatorConfig,
    VirtualUserProfile,
    default_names,
    model_user_behavior,
    run_simulation,
)

log = logging.getLogger(__name__)


def load_config_file(path: str) -> tuple[SessionConfig, dict]:
    """Parse a session config file; returns the config plus the raw document."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    inputs = TopicInputs(
        topic=raw["topic"],
        agenda=tuple(raw["agenda"]) if raw.get("agenda") else None,
        hints=raw.get("hints"),
        attendee_roles=raw.get("attendee_roles"),
    )
    config = derive_config(
        participant_count=int(raw["participants"]),
        profile=Profile(raw.get("profile", "small")),
        inputs=inputs,
        bot_keyword=raw.get("bot_keyword", "@mubot"),
        subtopic_count=int(raw.get("subtopic_count", 3)),
        random_seed=raw.get("seed"),
        arbitration_overrides=raw.get("arbitration"),
        strategy_ranks=raw.get("strategy_ranks"),
    )
    return config, raw


def _simulator_config(raw: dict) -> SimulatorConfig:
    section = raw.get("simulator") or {}
    return SimulatorConfig(
        context_turns=int(section.get("context_turns", 16)),
        behavior_cooldown=int(section.get("behavior_cooldown", 3)),
        length_mode=str(section.get("length_mode", "reject")),
        questioner_length_factor=float(section.get("questioner_length_factor", 1.0)),
        boost_min=float(section.get("boost_min", 1.0)),
        boost_avg=float(section.get("boost_avg", 1.0)),
        boost_max=float(section.get("boost_max", 1.0)),
    )


def _snippets_from_raw(raw: dict) -> list[ChatSnippet]:
    documents = raw.get("snippets")
    if not documents:
        return list(DEFAULT_SNIPPETS)
    return [
        ChatSnippet(turns=tuple((str(s), str(t)) for s, t in snippet))
        for snippet in documents
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facilichat",
        description="Group-chat facilitation bot: server, simulator, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the WebSocket chat server")
    p.add_argument("--config", required=True, help="session config file (JSON)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log", default=None, help="session log path (JSONL)")
    p.add_argument("--ui-dir", default=None, help="static directory for the web client")

    p = sub.add_parser("simulate", help="run a simulated multi-user session")
    p.add_argument("--config", required=True)
    p.add_argument("--turns", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument(
        "--script",
        default=None,
        help="scripted completions file, or 'live' for the config's provider",
    )
    p.add_argument("--out", default=None, help="session log path (JSONL)")
    p.add_argument("--profiles", default=None, help="virtual user profiles file (JSON)")
    p.add_argument("--profiles-out", default=None, help="write the profiles used")

    p = sub.add_parser("analyze", help="compute metrics over session logs")
    p.add_argument("--logs", required=True, help="glob pattern of session logs")
    p.add_argument("--annotations", default=None, help="consensus annotations (JSON)")
    p.add_argument("--out", default=None, help="report file (default: stdout)")

    p = sub.add_parser("replay", help="re-run a logged session and diff decisions")
    p.add_argument("--log", required=True)

    p = sub.add_parser("gen-config", help="derive a session config file")
    p.add_argument("--topic", required=True)
    p.add_argument("--participants", type=int, required=True)
    p.add_argument("--profile", choices=["small", "medium"], default="small")
    p.add_argument("--agenda", action="append", default=None)
    p.add_argument("--hints", default=None)
    p.add_argument("--attendee-roles", default=None)
    p.add_argument("--bot-keyword", default="@mubot")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="config file (default: stdout)")
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    config, raw = load_config_file(args.config)
    provider = build_provider(raw.get("provider"))
    app = create_app(config, provider, log_path=args.log, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config, raw = load_config_file(args.config)
    if args.script and args.script != "live":
        provider = load_script_file(args.script)
    else:
        provider = build_provider(raw.get("provider"))
    sim_config = _simulator_config(raw)
    import numpy as np

    if args.profiles:
        with open(args.profiles, "r", encoding="utf-8") as fh:
            profiles = [VirtualUserProfile.from_dict(d) for d in json.load(fh)]
    elif raw.get("profiles"):
        profiles = [VirtualUserProfile.from_dict(d) for d in raw["profiles"]]
    else:
        from .llm import LLMGateway

        names = default_names(config.participant_count)
        gateway = LLMGateway(provider, sleep=lambda _s: None)
        profiles = model_user_behavior(
            _snippets_from_raw(raw),
            names,
            gateway,
            np.random.default_rng(args.seed),
            config=sim_config,
        )
    result = run_simulation(
        config,
        profiles,
        turns=args.turns,
        seed=args.seed,
        provider=provider,
        log_path=args.out,
        sim_config=sim_config,
    )
    if args.profiles_out:
        with open(args.profiles_out, "w", encoding="utf-8") as fh:
            json.dump([p.to_dict() for p in result.profiles], fh, indent=2, sort_keys=True)
            fh.write("\n")
    strategies = sorted({d.chosen.name for d in result.pipeline.decisions})
    print(
        f"simulated {result.turns_taken} turns ({result.turns_skipped} skipped), "
        f"{len(result.transcript)} utterances, {len(result.pipeline.decisions)} cycles"
    )
    print(f"strategies used: {', '.join(strategies) if strategies else '(none)'}")
    if args.out:
        print(f"session log: {args.out}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    report = analyze_logs(args.logs, args.annotations)
    text = report.render()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    loaded = load_session(args.log)
    _pipeline, report = replay_session(loaded)
    print(f"replayed {report.cycles} cycles")
    if report.ok:
        print("replay matches the log")
        return 0
    for line in report.decision_mismatches:
        print(f"decision mismatch: {line}")
    for line in report.transcript_mismatches:
        print(f"transcript mismatch: {line}")
    return 1


def _cmd_gen_config(args: argparse.Namespace) -> int:
    inputs = TopicInputs(
        topic=args.topic,
        agenda=tuple(args.agenda) if args.agenda else None,
        hints=args.hints,
        attendee_roles=args.attendee_roles,
    )
    config = derive_config(
        participant_count=args.participants,
        profile=Profile(args.profile),
        inputs=inputs,
        bot_keyword=args.bot_keyword,
        random_seed=args.seed,
    )
    document = {
        "topic": config.topic,
        "participants": config.participant_count,
        "profile": args.profile,
        "bot_keyword": config.bot_keyword,
        "derived": {"n_exe": config.n_exe, "n_sw": config.n_sw, "n_lw": config.n_lw},
    }
    if config.agenda:
        document["agenda"] = list(config.agenda)
    if config.hints:
        document["hints"] = config.hints
    if config.attendee_roles:
        document["attendee_roles"] = config.attendee_roles
    if config.random_seed is not None:
        document["seed"] = config.random_seed
    text = json.dumps(document, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"config written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "replay": _cmd_replay,
    "gen-config": _cmd_gen_config,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except (
        InvalidConfigError,
        MetricsError,
        FileNotFoundError,
        json.JSONDecodeError,
        ValueError,
        RuntimeError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(dispatch())
