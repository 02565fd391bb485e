"""Session persistence: a line-delimited JSON log, one record per line.

Each line carries a "record" discriminator: "session" (config header),
"profiles" (simulated users), "utterance", "decision", or "llm" (verbatim
provider exchanges). Keys are sorted and every append is flushed, so a crash
loses at most the line being written and diffs between runs are stable
byte-for-byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping

from .core import (
    ArbitrationParams,
    SessionConfig,
    Strategy,
    Utterance,
    UtteranceKind,
)
from .arbitrator import StrategyDecision

log = logging.getLogger(__name__)

RECORD_SESSION = "session"
RECORD_PROFILES = "profiles"
RECORD_UTTERANCE = "utterance"
RECORD_DECISION = "decision"
RECORD_LLM = "llm"


def dumps(payload: Mapping) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_to_dict(config: SessionConfig) -> dict:
    data = {
        "topic": config.topic,
        "participant_count": config.participant_count,
        "n_exe": config.n_exe,
        "n_sw": config.n_sw,
        "n_lw": config.n_lw,
        "bot_keyword": config.bot_keyword,
        "subtopic_count": config.subtopic_count,
        "arbitration": {
            name: getattr(config.arbitration, name)
            for name in (
                "warmup_summarization",
                "cooldown_summarization",
                "warmup_encouragement",
                "encouragement_cooldown_increment",
                "warmup_transition",
                "cooldown_transition",
                "warmup_conflict",
                "conflict_stall_window",
                "n_active_required",
                "thre_freq_lt",
                "thre_len_lt",
                "thre_freq_st",
                "thre_len_st",
                "silence_alpha",
                "semantic_beta",
                "chime_threshold",
            )
        },
    }
    if config.agenda is not None:
        data["agenda"] = list(config.agenda)
    if config.hints is not None:
        data["hints"] = config.hints
    if config.attendee_roles is not None:
        data["attendee_roles"] = config.attendee_roles
    if config.random_seed is not None:
        data["random_seed"] = config.random_seed
    if config.strategy_ranks:
        data["strategy_ranks"] = dict(config.strategy_ranks)
    return data


def config_from_dict(data: Mapping) -> SessionConfig:
    return SessionConfig(
        topic=data["topic"],
        participant_count=data["participant_count"],
        n_exe=data["n_exe"],
        n_sw=data["n_sw"],
        n_lw=data["n_lw"],
        arbitration=ArbitrationParams(**data.get("arbitration", {})),
        agenda=tuple(data["agenda"]) if data.get("agenda") else None,
        hints=data.get("hints"),
        attendee_roles=data.get("attendee_roles"),
        bot_keyword=data.get("bot_keyword", "@mubot"),
        subtopic_count=data.get("subtopic_count", 3),
        random_seed=data.get("random_seed"),
        strategy_ranks=data.get("strategy_ranks"),
    )


def utterance_to_dict(utt: Utterance) -> dict:
    return {
        "id": utt.id,
        "sender": utt.sender,
        "kind": utt.kind.value,
        "text": utt.text,
        "word_count": utt.word_count,
        "ts": utt.timestamp,
    }


def utterance_from_dict(data: Mapping) -> Utterance:
    return Utterance(
        id=data["id"],
        sender=data["sender"],
        kind=UtteranceKind(data["kind"]),
        text=data["text"],
        word_count=data["word_count"],
        timestamp=data["ts"],
    )


def decision_to_dict(decision: StrategyDecision) -> dict:
    data = {
        "cycle": decision.cycle_index,
        "utterance_index": decision.utterance_index,
        "chosen": decision.chosen.name,
        "conditions": {s.name: v for s, v in decision.conditions.items()},
        "gates": {s.name: v for s, v in decision.gates.items()},
        "eligible": [s.name for s in decision.eligible],
        "forced": decision.forced,
        "downgraded": decision.downgraded,
    }
    if decision.p_chime is not None:
        data["p_silence"] = round(decision.p_silence, 9)
        data["p_semantic"] = round(decision.p_semantic, 9)
        data["p_chime"] = round(decision.p_chime, 9)
    if decision.target is not None:
        data["target"] = decision.target
    if decision.hint is not None:
        data["hint"] = decision.hint
    return data


def decision_from_dict(data: Mapping) -> StrategyDecision:
    return StrategyDecision(
        cycle_index=data["cycle"],
        utterance_index=data["utterance_index"],
        chosen=Strategy[data["chosen"]],
        conditions={Strategy[k]: v for k, v in data.get("conditions", {}).items()},
        gates={Strategy[k]: v for k, v in data.get("gates", {}).items()},
        eligible=[Strategy[name] for name in data.get("eligible", [])],
        p_silence=data.get("p_silence"),
        p_semantic=data.get("p_semantic"),
        p_chime=data.get("p_chime"),
        target=data.get("target"),
        hint=data.get("hint"),
        forced=data.get("forced", False),
        downgraded=data.get("downgraded", False),
    )


class SessionLog:
    """Append-only session log; keeps an in-memory mirror of every record.

    Write failures are demoted to warnings: the record stays in the buffer so
    an operator can recover it, and the chat keeps running.
    """

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path is not None else None
        self.buffer: list[dict] = []
        self.write_errors = 0
        self._fh: IO[str] | None = None
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = self.path.open("w", encoding="utf-8")
            except OSError as exc:
                self.write_errors += 1
                log.error("cannot open session log %s: %s", self.path, exc)

    def append(self, kind: str, payload: Mapping) -> None:
        record = {"record": kind, **payload}
        self.buffer.append(record)
        if self._fh is None:
            return
        try:
            self._fh.write(dumps(record) + "\n")
            self._fh.flush()
        except (OSError, ValueError) as exc:  # ValueError: writing a closed file
            self.write_errors += 1
            log.error("session log write failed (record kept in memory): %s", exc)

    def append_session(self, config: SessionConfig) -> None:
        self.append(RECORD_SESSION, {"config": config_to_dict(config)})

    def append_profiles(self, profiles: list[dict]) -> None:
        self.append(RECORD_PROFILES, {"profiles": profiles})

    def append_utterance(self, utt: Utterance) -> None:
        self.append(RECORD_UTTERANCE, utterance_to_dict(utt))

    def append_decision(self, decision: StrategyDecision) -> None:
        self.append(RECORD_DECISION, decision_to_dict(decision))

    def append_llm(self, record) -> None:
        self.append(RECORD_LLM, record.to_dict())

    def close(self) -> None:
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
            self._fh = None


@dataclass
class LoadedSession:
    """Everything parsed back out of one session log."""

    config: SessionConfig | None
    utterances: list[Utterance] = field(default_factory=list)
    decisions: list[StrategyDecision] = field(default_factory=list)
    llm_records: list[dict] = field(default_factory=list)
    profiles: list[dict] = field(default_factory=list)


def load_session(path: str | Path) -> LoadedSession:
    """Parse a session log; unknown record kinds are skipped with a warning."""
    loaded = LoadedSession(config=None)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: corrupt log line: {exc}") from exc
            kind = record.get("record")
            if kind == RECORD_SESSION:
                loaded.config = config_from_dict(record["config"])
            elif kind == RECORD_UTTERANCE:
                loaded.utterances.append(utterance_from_dict(record))
            elif kind == RECORD_DECISION:
                loaded.decisions.append(decision_from_dict(record))
            elif kind == RECORD_LLM:
                loaded.llm_records.append(record)
            elif kind == RECORD_PROFILES:
                loaded.profiles = record.get("profiles", [])
            else:
                log.warning("%s:%d: skipping unknown record kind %r", path, lineno, kind)
    return loaded


def persist(
    transcript: Iterable[Utterance],
    decisions: Iterable[StrategyDecision],
    path: str | Path,
    *,
    config: SessionConfig | None = None,
) -> None:
    """Write a whole session in one go (same format as the streaming log)."""
    sink = SessionLog(path)
    try:
        if config is not None:
            sink.append_session(config)
        for utt in transcript:
            sink.append_utterance(utt)
        for decision in decisions:
            sink.append_decision(decision)
        if sink.write_errors:
            raise OSError(f"{sink.write_errors} write error(s) while persisting {path}")
    finally:
        sink.close()
