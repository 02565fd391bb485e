"""The per-session facilitation state machine.

One pipeline instance owns the transcript, the analyzer state and the trigger
bookkeeping for a single chat. Human utterances are ingested one at a time;
every n_exe non-ping human utterances one execution cycle runs (analysis,
arbitration, response generation), and a message that pings the bot gets its
own immediate direct-chat cycle. The server drives this from asyncio, the
simulator and replay drive it synchronously; cycles must never overlap.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .analyzer import (
    AccumulativeSummary,
    SubTopicState,
    extract_discussed_subtopics,
    extract_participant_stats,
    update_accumulative_summary,
    update_subtopic_status,
)
from .arbitrator import (
    Strategy,
    StrategyDecision,
    TriggerState,
    classify_stuck_unsolved,
    detect_direct_ping,
    evaluate_cycle,
    forced_direct_decision,
    silent_decision,
    ranks_from_config,
)
from .core import SessionConfig, SubTopic, Utterance, UtteranceKind, window
from .llm import (
    LLMGateway,
    ProviderUnavailableError,
    ScriptedProvider,
    extract_answer,
)
from .persistence import SessionLog
from .prompts import (
    CHIME_IN,
    CONFLICT,
    DIRECT_CHAT,
    ENCOURAGEMENT,
    TAKE_HOME_SUMMARY,
    TRANSITION,
    TRANSITION_ASK_INTEREST,
    TRANSITION_PROPOSE_NEXT,
    render_context,
    render_window,
)
from .subtopics import generate_subtopics

log = logging.getLogger(__name__)


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


def counter_clock(start: int = 0, step: int = 1000) -> Callable[[], int]:
    """A deterministic clock for simulations: start, start+step, ..."""
    counter = itertools.count(start, step)
    return lambda: next(counter)


@dataclass
class IngestResult:
    utterance: Utterance
    is_ping: bool
    cycle_due: bool


@dataclass
class CycleOutcome:
    decision: StrategyDecision
    response: str


class SessionPipeline:
    def __init__(
        self,
        config: SessionConfig,
        gateway: LLMGateway,
        *,
        clock: Callable[[], int] | None = None,
        session_log: SessionLog | None = None,
    ):
        self.config = config
        self.gateway = gateway
        self.clock = clock or wall_clock_ms
        self.log = session_log
        self.transcript: list[Utterance] = []
        self.participants: list[str] = []
        self.subtopics: list[SubTopic] | None = None
        self.state: SubTopicState | None = None
        self.summary = AccumulativeSummary()
        self.trigger = TriggerState()
        self.decisions: list[StrategyDecision] = []
        self.cycle_index = 0
        self._pending = 0
        self._ranks = ranks_from_config(config.strategy_ranks)
        self._id_lock = threading.Lock()
        self._next_id = 1
        self._in_cycle = False
        if self.log is not None:
            self.log.append_session(config)

    # --- setup ---------------------------------------------------------------

    def initialize(self) -> list[SubTopic]:
        """Generate the session's sub-topics; callable exactly once."""
        if self.subtopics is not None:
            raise RuntimeError("sub-topics already generated for this session")
        self.subtopics = generate_subtopics(self.config, self.gateway)
        self.state = SubTopicState(self.subtopics)
        return self.subtopics

    def register_participant(self, name: str) -> None:
        if name not in self.participants:
            self.participants.append(name)

    # --- ingest --------------------------------------------------------------

    def allocate_id(self) -> int:
        with self._id_lock:
            value = self._next_id
            self._next_id += 1
            return value

    def add_human(
        self, sender: str, text: str, timestamp: int | None = None
    ) -> IngestResult:
        """Record one human utterance and report what it sets in motion.

        Ping utterances do not advance the execution-cycle counter; they get
        their own forced cycle instead.
        """
        if self.state is None:
            raise RuntimeError("initialize() must run before ingesting utterances")
        utt = Utterance.make(
            self.allocate_id(),
            sender,
            UtteranceKind.HUMAN,
            text,
            timestamp if timestamp is not None else self.clock(),
        )
        self.transcript.append(utt)
        self.register_participant(sender)
        self.trigger.note_human(sender)
        if self.log is not None:
            self.log.append_utterance(utt)
        is_ping = detect_direct_ping(utt, self.config.bot_keyword)
        cycle_due = False
        if not is_ping:
            self._pending += 1
            if self._pending >= self.config.n_exe:
                self._pending = 0
                cycle_due = True
        return IngestResult(utt, is_ping, cycle_due)

    def commit_bot_message(self, text: str, timestamp: int | None = None) -> Utterance:
        """Append the bot's reply to the transcript (id allocated here)."""
        utt = Utterance.make(
            self.allocate_id(),
            self.config.bot_name,
            UtteranceKind.BOT,
            text,
            timestamp if timestamp is not None else self.clock(),
        )
        self.transcript.append(utt)
        self.trigger.note_bot_spoke()
        if self.log is not None:
            self.log.append_utterance(utt)
        return utt

    # --- execution cycle -----------------------------------------------------

    def run_cycle(self, ping: Utterance | None = None) -> CycleOutcome:
        """One full analysis + arbitration + generation pass.

        With ``ping`` set this is a direct-chat cycle: analysis still runs so
        state stays fresh, but arbitration is skipped and the chosen strategy
        is DIRECT_CHATTING. The caller is responsible for serialising cycles
        and for committing the returned response to the transcript.
        """
        if self.state is None:
            raise RuntimeError("initialize() must run before cycles")
        if self._in_cycle:
            raise RuntimeError("execution cycles must not overlap")
        self._in_cycle = True
        try:
            return self._run_cycle(ping)
        finally:
            self._in_cycle = False

    def _run_cycle(self, ping: Utterance | None) -> CycleOutcome:
        self.cycle_index += 1
        short = window(self.transcript, self.config.n_sw)
        update_subtopic_status(self.state, self.config, short, self.gateway)
        discussed = extract_discussed_subtopics(self.state, short, self.gateway)
        self.state.attribute(short, discussed)
        update_accumulative_summary(self.summary, discussed, short, self.gateway)
        # fewer than 2 known speakers: statistics are undefined, so arbitration
        # cannot run; pings still get answered, everything else stays silent
        stats = (
            extract_participant_stats(
                self.transcript, self.config, self.state, discussed, self.participants
            )
            if len(self.participants) >= 2
            else None
        )
        self.trigger.record_well_count(self.state.well_discussed_count())

        if ping is not None:
            decision = forced_direct_decision(self.cycle_index, self.trigger)
        elif stats is None:
            decision = silent_decision(self.cycle_index, self.trigger)
        else:
            signals = classify_stuck_unsolved(short, self.gateway, self.trigger.n_silent)
            focal_record = self.state.focal_topic()
            focal = (
                (
                    stats.n_ever_discussed[focal_record.subtopic.index],
                    stats.n_discussing[focal_record.subtopic.index],
                )
                if focal_record is not None
                else None
            )
            decision = evaluate_cycle(
                cycle_index=self.cycle_index,
                trigger_state=self.trigger,
                params=self.config.arbitration,
                participant_count=self.config.participant_count,
                stats=stats,
                focal=focal,
                signals=signals,
                ranks=self._ranks,
            )

        response = ""
        if decision.chosen is not Strategy.KEEP_SILENT:
            response = self._generate_response(decision, ping, short)
            if response:
                self.trigger.commit_fire(
                    decision.chosen,
                    decision.target,
                    encouragement_increment=self.config.arbitration.encouragement_cooldown_increment,
                )
            else:
                log.warning(
                    "%s produced no text, keeping silent this cycle",
                    decision.chosen.name,
                )
                decision.downgraded = True
                decision.chosen = Strategy.KEEP_SILENT
        if decision.chosen is Strategy.KEEP_SILENT:
            self.trigger.note_cycle_silent()
        self.decisions.append(decision)
        if self.log is not None:
            self.log.append_decision(decision)
        return CycleOutcome(decision, response)

    def run_cycle_and_commit(self, ping: Utterance | None = None) -> Utterance | None:
        """Synchronous convenience for the simulator and replay."""
        outcome = self.run_cycle(ping)
        if outcome.response:
            return self.commit_bot_message(outcome.response)
        return None

    # --- response generation ---------------------------------------------------

    def _generate_response(
        self,
        decision: StrategyDecision,
        ping: Utterance | None,
        short: list[Utterance],
    ) -> str:
        assert self.state is not None
        base = {
            "bot_name": self.config.bot_name,
            "topic": self.config.topic,
            "window": render_window(short),
        }
        strategy = decision.chosen
        try:
            if strategy is Strategy.DIRECT_CHATTING:
                assert ping is not None
                completion = self.gateway.generate(
                    DIRECT_CHAT,
                    {
                        **base,
                        "context": render_context(self.config.topic_inputs),
                        "sender": ping.sender,
                        "request": ping.text,
                    },
                )
            elif strategy is Strategy.INITIATIVE_SUMMARIZATION:
                completion = self.gateway.generate(
                    TAKE_HOME_SUMMARY,
                    {
                        **base,
                        "statuses": self.state.render_statuses(),
                        "cells": self.summary.render(self.state.subtopics),
                    },
                )
            elif strategy is Strategy.PARTICIPATION_ENCOURAGEMENT:
                target = decision.target or ""
                notes = self.summary.for_participant(target)
                titles = {t.index: t.title for t in self.state.subtopics}
                target_summary = (
                    "; ".join(f"{titles[i]}: {text}" for i, text in notes.items())
                    or "(nothing yet)"
                )
                completion = self.gateway.generate(
                    ENCOURAGEMENT,
                    {**base, "target": target, "target_summary": target_summary},
                )
            elif strategy is Strategy.SUBTOPIC_TRANSITION:
                mode = (
                    TRANSITION_ASK_INTEREST
                    if decision.hint == "ask_interest"
                    else TRANSITION_PROPOSE_NEXT
                )
                completion = self.gateway.generate(
                    TRANSITION,
                    {**base, "statuses": self.state.render_statuses(), "mode": mode},
                )
            elif strategy is Strategy.CONFLICT_RESOLUTION:
                completion = self.gateway.generate(
                    CONFLICT,
                    {
                        **base,
                        "statuses": self.state.render_statuses(),
                        "cells": self.summary.render(self.state.subtopics),
                    },
                )
            elif strategy is Strategy.IN_CONTEXT_CHIME_IN:
                completion = self.gateway.generate(
                    CHIME_IN,
                    {**base, "context": render_context(self.config.topic_inputs)},
                )
            else:
                return ""
        except ProviderUnavailableError as exc:
            log.warning("response generation failed for %s: %s", strategy.name, exc)
            return ""
        return extract_answer(completion).strip()


# --- replay -------------------------------------------------------------------

@dataclass
class ReplayReport:
    """Comparison of a re-run against what the log recorded."""

    cycles: int
    decision_mismatches: list[str]
    transcript_mismatches: list[str]

    @property
    def ok(self) -> bool:
        return not self.decision_mismatches and not self.transcript_mismatches


def replay_session(loaded, *, strict_script: bool = False) -> tuple[SessionPipeline, ReplayReport]:
    """Re-run a logged session through the pipeline with scripted completions.

    Recorded provider exchanges feed a per-template scripted provider; human
    utterances are re-ingested in order with their original timestamps. The
    report lists divergences in chosen strategies and in bot/transcript text.
    Lenient scripting keeps a diverging replay running (missing completions
    come back empty) so the divergence lands in the report, not a crash.
    """
    if loaded.config is None:
        raise ValueError("log has no session record, cannot replay")
    script: dict[str, list[str]] = {}
    for record in loaded.llm_records:
        script.setdefault(record.get("template", ""), []).append(
            record.get("completion", "")
        )
    provider = ScriptedProvider(script=script, strict=strict_script)
    gateway = LLMGateway(provider)
    pipeline = SessionPipeline(loaded.config, gateway, clock=counter_clock())
    for utt in loaded.utterances:
        if utt.kind is UtteranceKind.HUMAN:
            pipeline.register_participant(utt.sender)
    pipeline.initialize()
    for utt in loaded.utterances:
        if utt.kind is not UtteranceKind.HUMAN:
            continue
        result = pipeline.add_human(utt.sender, utt.text, utt.timestamp)
        if result.is_ping:
            pipeline.run_cycle_and_commit(result.utterance)
        elif result.cycle_due:
            pipeline.run_cycle_and_commit()

    def decision_key(d: StrategyDecision) -> tuple:
        return (
            d.chosen,
            d.cycle_index,
            d.utterance_index,
            tuple(sorted((s.name, v) for s, v in d.conditions.items())),
            tuple(sorted((s.name, v) for s, v in d.gates.items())),
            d.target,
            d.hint,
            d.downgraded,
        )

    decision_mismatches: list[str] = []
    for index, (old, new) in enumerate(
        zip(loaded.decisions, pipeline.decisions), start=1
    ):
        if decision_key(old) != decision_key(new):
            decision_mismatches.append(
                f"cycle {index}: logged {old.chosen.name}@{old.utterance_index}, "
                f"replayed {new.chosen.name}@{new.utterance_index}"
            )
    if len(loaded.decisions) != len(pipeline.decisions):
        decision_mismatches.append(
            f"decision count: logged {len(loaded.decisions)}, replayed {len(pipeline.decisions)}"
        )

    transcript_mismatches: list[str] = []
    old_texts = [(u.sender, u.kind.value, u.text) for u in loaded.utterances]
    new_texts = [(u.sender, u.kind.value, u.text) for u in pipeline.transcript]
    if old_texts != new_texts:
        limit = max(len(old_texts), len(new_texts))
        for i in range(limit):
            a = old_texts[i] if i < len(old_texts) else None
            b = new_texts[i] if i < len(new_texts) else None
            if a != b:
                transcript_mismatches.append(f"utterance {i + 1}: logged {a}, replayed {b}")
    return pipeline, ReplayReport(
        cycles=pipeline.cycle_index,
        decision_mismatches=decision_mismatches,
        transcript_mismatches=transcript_mismatches,
    )
