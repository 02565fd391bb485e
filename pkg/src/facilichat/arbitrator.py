"""Conversational strategy arbitration.

Each execution cycle every strategy's trigger condition is evaluated, the
warm-up/cool-down gates are applied, and the lowest-ranked strategy that
passes both wins. A direct ping always wins; nothing eligible means the bot
keeps silent. Warm-ups and cool-downs are counted in human utterances since
session start, so a bigger group gives the bot proportionally more patience.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import ArbitrationParams, Strategy, Utterance
from .llm import LLMGateway, ProviderUnavailableError, extract_answer
from .analyzer import ParticipantStats
from .prompts import CHIME_CLASSIFIER, render_window

log = logging.getLogger(__name__)


class TransitionHint:
    """The two flavours of a sub-topic transition nudge."""

    ASK_INTEREST = "ask_interest"
    PROPOSE_NEXT = "propose_next"


@dataclass
class TriggerState:
    """Mutable warm-up/cool-down bookkeeping, advanced by the pipeline.

    utterance_index counts human utterances since session start.
    n_well_history records (utterance_index, well-discussed count) samples and
    is seeded with (0, 0) so stall detection has a baseline from the start.
    encouragement_cooldown holds the per-participant growing cool-down c(x).
    """

    utterance_index: int = 0
    last_fired: dict[Strategy, int] = field(default_factory=dict)
    encouragement_cooldown: dict[str, int] = field(default_factory=dict)
    last_pinged: dict[str, int] = field(default_factory=dict)
    n_silent: int = 0
    n_well_history: list[tuple[int, int]] = field(default_factory=lambda: [(0, 0)])
    active_since_last_summary: set[str] = field(default_factory=set)

    def note_human(self, sender: str) -> None:
        self.utterance_index += 1
        self.active_since_last_summary.add(sender)

    def note_bot_spoke(self) -> None:
        self.n_silent = 0

    def note_cycle_silent(self) -> None:
        self.n_silent += 1

    def record_well_count(self, count: int) -> None:
        if count != self.n_well_history[-1][1]:
            self.n_well_history.append((self.utterance_index, count))

    def commit_fire(
        self,
        strategy: Strategy,
        target: str | None = None,
        *,
        encouragement_increment: int = 2,
    ) -> None:
        """Bookkeeping after a strategy actually produced a message."""
        self.last_fired[strategy] = self.utterance_index
        if strategy is Strategy.INITIATIVE_SUMMARIZATION:
            self.active_since_last_summary.clear()
        if strategy is Strategy.PARTICIPATION_ENCOURAGEMENT and target is not None:
            self.last_pinged[target] = self.utterance_index
            self.encouragement_cooldown[target] = (
                self.encouragement_cooldown.get(target, 0) + encouragement_increment
            )


@dataclass(frozen=True)
class ChimeInSignals:
    b_stuck: int
    b_unsolve: int
    n_silent: int


@dataclass
class StrategyDecision:
    """Everything the arbitrator concluded in one cycle, for logs and replay."""

    cycle_index: int
    utterance_index: int
    chosen: Strategy
    conditions: dict[Strategy, bool]
    gates: dict[Strategy, bool]
    eligible: list[Strategy]
    p_silence: float | None = None
    p_semantic: float | None = None
    p_chime: float | None = None
    target: str | None = None
    hint: str | None = None
    forced: bool = False
    downgraded: bool = False


# --- per-strategy trigger conditions -----------------------------------------

def detect_direct_ping(utterance: Utterance, bot_keyword: str) -> bool:
    """Case-insensitive substring match of the bot keyword."""
    return bot_keyword.lower() in utterance.text.lower()


def detect_lurkers(stats: ParticipantStats, params: ArbitrationParams) -> list[str]:
    """Participants statistically far below the group over the long window.

    A lurker sits below the mean in both frequency and length with a squared
    z-score above the threshold on each, and is also inactive over the short
    window. Zero variance means a uniform group: nobody is a lurker. Results
    are sorted quietest-first (frequency, then length, then name).
    """
    if stats.freq_long_var == 0.0 or stats.len_long_var == 0.0:
        return []
    lurkers: list[str] = []
    for name in stats.participants:
        freq = float(stats.freq_long[name])
        length = float(stats.len_long[name])
        freq_score = (freq - stats.freq_long_mean) ** 2 / stats.freq_long_var
        len_score = (length - stats.len_long_mean) ** 2 / stats.len_long_var
        if (
            freq < stats.freq_long_mean
            and length < stats.len_long_mean
            and freq_score > params.thre_freq_lt
            and len_score > params.thre_len_lt
            and stats.freq_short[name] < params.thre_freq_st
            and stats.len_short[name] < params.thre_len_st
        ):
            lurkers.append(name)
    lurkers.sort(key=lambda n: (stats.freq_long[n], stats.len_long[n], n))
    return lurkers


def initiative_summarization_condition(
    active_speakers: set[str], params: ArbitrationParams
) -> bool:
    return len(active_speakers) >= params.n_active_required


def subtopic_transition_condition(
    n_ever_discussed: int, n_discussing: int, participant_count: int
) -> str | None:
    """ASK_INTEREST while uptake is narrow, PROPOSE_NEXT once attention fades.

    Narrow uptake: fewer than half the group has ever engaged the focal
    sub-topic. Fading: at least half engaged overall but the current speakers
    have dropped below half of those.
    """
    if n_ever_discussed < participant_count / 2:
        return TransitionHint.ASK_INTEREST
    if n_discussing < n_ever_discussed / 2:
        return TransitionHint.PROPOSE_NEXT
    return None


def conflict_resolution_condition(
    n_well_history: Sequence[tuple[int, int]],
    utterance_index: int,
    participant_count: int,
    *,
    stall_window: int | None = None,
) -> bool:
    """True when the well-discussed count has not grown over the stall window.

    The window defaults to 9 * participant_count human utterances. History is
    (utterance_index, count) samples in chronological order; a session younger
    than the window never stalls.
    """
    span = stall_window if stall_window is not None else 9 * participant_count
    cutoff = utterance_index - span
    if cutoff < 0:
        return False
    baseline: int | None = None
    for index, count in n_well_history:
        if index <= cutoff:
            baseline = count
        else:
            break
    if baseline is None:
        return False
    current = n_well_history[-1][1]
    return current <= baseline


def silence_probability(n_silent: int, alpha: float = 0.2) -> float:
    """n / (n + alpha): approaches 1 the longer the bot has stayed silent."""
    if n_silent < 0:
        raise ValueError("n_silent must be >= 0")
    return n_silent / (n_silent + alpha)


def semantic_probability(b_stuck: int, b_unsolve: int, beta: float = 0.4) -> float:
    """Full weight when stuck, beta of the remainder when merely unsolved."""
    return b_stuck + beta * (1 - b_stuck) * b_unsolve


def chime_in_decision(
    signals: ChimeInSignals, params: ArbitrationParams
) -> tuple[float, bool]:
    """Mean of the silence and semantic scores; fires on strictly above threshold."""
    p_silence = silence_probability(signals.n_silent, params.silence_alpha)
    p_semantic = semantic_probability(
        signals.b_stuck, signals.b_unsolve, params.semantic_beta
    )
    p = (p_silence + p_semantic) / 2.0
    return p, p > params.chime_threshold


_CLASSIFIER_RE = re.compile(r"stuck\s*=\s*([01]).*?unsolve\s*=\s*([01])", re.S)


def classify_stuck_unsolved(
    short_window: Sequence[Utterance],
    gateway: LLMGateway,
    n_silent: int = 0,
) -> ChimeInSignals:
    """Ask the provider whether the window looks stuck / has an open question.

    Anything unparseable or a failed call degrades to (0, 0): no chime-in
    pressure from the semantic side.
    """
    if not short_window:
        return ChimeInSignals(0, 0, n_silent)
    try:
        completion = gateway.generate(
            CHIME_CLASSIFIER, {"window": render_window(list(short_window))}
        )
    except ProviderUnavailableError as exc:
        log.warning("stuck/unsolved classifier failed, assuming calm: %s", exc)
        return ChimeInSignals(0, 0, n_silent)
    match = _CLASSIFIER_RE.search(extract_answer(completion))
    if match is None:
        log.warning("unparseable classifier output, assuming calm")
        return ChimeInSignals(0, 0, n_silent)
    return ChimeInSignals(int(match.group(1)), int(match.group(2)), n_silent)


# --- gating and arbitration ---------------------------------------------------

def gate(
    strategy: Strategy,
    trigger_state: TriggerState,
    params: ArbitrationParams,
    *,
    target: str | None = None,
) -> bool:
    """Warm-up/cool-down eligibility for one strategy at the current index.

    Direct pings and chime-ins bypass gating entirely. Encouragement adds a
    per-participant cool-down that starts at zero and grows by 2 with every
    nudge the target receives.
    """
    index = trigger_state.utterance_index
    if strategy in (Strategy.DIRECT_CHATTING, Strategy.IN_CONTEXT_CHIME_IN):
        return True
    if strategy is Strategy.KEEP_SILENT:
        return True
    warmups = {
        Strategy.INITIATIVE_SUMMARIZATION: params.warmup_summarization,
        Strategy.PARTICIPATION_ENCOURAGEMENT: params.warmup_encouragement,
        Strategy.SUBTOPIC_TRANSITION: params.warmup_transition,
        Strategy.CONFLICT_RESOLUTION: params.warmup_conflict,
    }
    cooldowns = {
        Strategy.INITIATIVE_SUMMARIZATION: params.cooldown_summarization,
        Strategy.SUBTOPIC_TRANSITION: params.cooldown_transition,
        # conflict resolution reuses the transition cool-down value on its own timer
        Strategy.CONFLICT_RESOLUTION: params.cooldown_transition,
    }
    if index < warmups[strategy]:
        return False
    if strategy is Strategy.PARTICIPATION_ENCOURAGEMENT:
        if target is None:
            return False
        last = trigger_state.last_pinged.get(target)
        if last is None:
            return True
        return index - last >= trigger_state.encouragement_cooldown.get(target, 0)
    last = trigger_state.last_fired.get(strategy)
    if last is None:
        return True
    return index - last >= cooldowns[strategy]


def arbitrate(
    conditions: Mapping[Strategy, bool],
    gates: Mapping[Strategy, bool],
    ranks: Mapping[Strategy, int] | None = None,
) -> Strategy:
    """Lowest-ranked strategy that both triggered and passed its gate.

    Ranks default to the Strategy enum values; KEEP_SILENT is the fallback
    when nothing is eligible.
    """
    eligible = [
        strategy
        for strategy in Strategy
        if strategy is not Strategy.KEEP_SILENT
        and conditions.get(strategy, False)
        and gates.get(strategy, False)
    ]
    if not eligible:
        return Strategy.KEEP_SILENT
    if ranks is None:
        return min(eligible)
    return min(eligible, key=lambda s: (ranks.get(s, int(s)), int(s)))


def ranks_from_config(mapping: Mapping[str, int] | None) -> dict[Strategy, int] | None:
    if not mapping:
        return None
    ranks: dict[Strategy, int] = {}
    for name, rank in mapping.items():
        ranks[Strategy[name.upper()]] = int(rank)
    return ranks


def evaluate_cycle(
    *,
    cycle_index: int,
    trigger_state: TriggerState,
    params: ArbitrationParams,
    participant_count: int,
    stats: ParticipantStats,
    focal: tuple[int, int] | None,
    signals: ChimeInSignals,
    ranks: Mapping[Strategy, int] | None = None,
) -> StrategyDecision:
    """Evaluate all periodic strategy conditions and pick the winner.

    ``focal`` carries (n_ever_discussed, n_discussing) of the focal sub-topic,
    or None when nothing is being discussed (then no transition can trigger).
    Direct pings never go through here; the pipeline forces those.
    """
    lurkers = detect_lurkers(stats, params)
    target: str | None = None
    for name in lurkers:
        if gate(Strategy.PARTICIPATION_ENCOURAGEMENT, trigger_state, params, target=name):
            target = name
            break
    hint = (
        subtopic_transition_condition(focal[0], focal[1], participant_count)
        if focal is not None
        else None
    )
    p_chime, chime_fires = chime_in_decision(signals, params)
    conditions = {
        Strategy.DIRECT_CHATTING: False,
        Strategy.INITIATIVE_SUMMARIZATION: initiative_summarization_condition(
            trigger_state.active_since_last_summary, params
        ),
        Strategy.PARTICIPATION_ENCOURAGEMENT: bool(lurkers),
        Strategy.SUBTOPIC_TRANSITION: hint is not None,
        Strategy.CONFLICT_RESOLUTION: conflict_resolution_condition(
            trigger_state.n_well_history,
            trigger_state.utterance_index,
            participant_count,
            stall_window=params.conflict_stall_window,
        ),
        Strategy.IN_CONTEXT_CHIME_IN: chime_fires,
        Strategy.KEEP_SILENT: True,
    }
    gates = {
        strategy: gate(strategy, trigger_state, params, target=target)
        if strategy is not Strategy.PARTICIPATION_ENCOURAGEMENT
        else target is not None
        for strategy in Strategy
    }
    chosen = arbitrate(conditions, gates, ranks)
    eligible = [
        s
        for s in Strategy
        if s is not Strategy.KEEP_SILENT and conditions[s] and gates[s]
    ]
    return StrategyDecision(
        cycle_index=cycle_index,
        utterance_index=trigger_state.utterance_index,
        chosen=chosen,
        conditions=conditions,
        gates=gates,
        eligible=eligible,
        p_silence=silence_probability(signals.n_silent, params.silence_alpha),
        p_semantic=semantic_probability(
            signals.b_stuck, signals.b_unsolve, params.semantic_beta
        ),
        p_chime=p_chime,
        target=target if chosen is Strategy.PARTICIPATION_ENCOURAGEMENT else None,
        hint=hint if chosen is Strategy.SUBTOPIC_TRANSITION else None,
    )


def forced_direct_decision(cycle_index: int, trigger_state: TriggerState) -> StrategyDecision:
    """Decision for a ping cycle: direct chatting, no conditions evaluated."""
    conditions = {strategy: False for strategy in Strategy}
    conditions[Strategy.DIRECT_CHATTING] = True
    conditions[Strategy.KEEP_SILENT] = True
    gates = {strategy: True for strategy in Strategy}
    return StrategyDecision(
        cycle_index=cycle_index,
        utterance_index=trigger_state.utterance_index,
        chosen=Strategy.DIRECT_CHATTING,
        conditions=conditions,
        gates=gates,
        eligible=[Strategy.DIRECT_CHATTING],
        forced=True,
    )


def silent_decision(cycle_index: int, trigger_state: TriggerState) -> StrategyDecision:
    """Fallback when statistics cannot be computed (fewer than 2 speakers)."""
    conditions = {strategy: False for strategy in Strategy}
    conditions[Strategy.KEEP_SILENT] = True
    gates = {strategy: True for strategy in Strategy}
    return StrategyDecision(
        cycle_index=cycle_index,
        utterance_index=trigger_state.utterance_index,
        chosen=Strategy.KEEP_SILENT,
        conditions=conditions,
        gates=gates,
        eligible=[Strategy.KEEP_SILENT],
    )
