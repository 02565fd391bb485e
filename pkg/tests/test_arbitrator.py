"""Strategy conditions, probability formulas, gating, and ranking."""

import random

import pytest

from facilichat.analyzer import ParticipantStats
from facilichat.arbitrator import (
    ChimeInSignals,
    Strategy,
    TransitionHint,
    TriggerState,
    arbitrate,
    chime_in_decision,
    classify_stuck_unsolved,
    conflict_resolution_condition,
    detect_direct_ping,
    detect_lurkers,
    gate,
    initiative_summarization_condition,
    semantic_probability,
    silence_probability,
    subtopic_transition_condition,
)
from facilichat.core import ArbitrationParams, Utterance, UtteranceKind
from facilichat.llm import LLMGateway, ScriptedProvider

PARAMS = ArbitrationParams.for_participants(4)


def stats_table(freq_long, len_long, freq_short=None, len_short=None):
    """Build ParticipantStats straight from long/short window tallies."""
    names = tuple(freq_long)
    n = len(names)
    freq_values = [float(freq_long[k]) for k in names]
    len_values = [float(len_long[k]) for k in names]
    freq_mean = sum(freq_values) / n
    len_mean = sum(len_values) / n
    freq_var = sum((v - freq_mean) ** 2 for v in freq_values) / (n - 1)
    len_var = sum((v - len_mean) ** 2 for v in len_values) / (n - 1)
    return ParticipantStats(
        participants=names,
        freq_short=freq_short or {k: 0 for k in names},
        len_short=len_short or {k: 0 for k in names},
        freq_long=dict(freq_long),
        len_long=dict(len_long),
        freq_long_mean=freq_mean,
        freq_long_var=freq_var,
        len_long_mean=len_mean,
        len_long_var=len_var,
        n_ever_discussed={},
        n_discussing={},
        interest={},
    )


# --- ping detection ------------------------------------------------------------

def test_ping_detection_case_insensitive_substring():
    utt = Utterance.make(1, "amy", UtteranceKind.HUMAN, "hey @MuBot what is left?", 0)
    assert detect_direct_ping(utt, "@mubot")
    plain = Utterance.make(2, "amy", UtteranceKind.HUMAN, "hey folks", 0)
    assert not detect_direct_ping(plain, "@mubot")


# --- lurker detection ---------------------------------------------------------

def test_lurker_spec_table():
    # freq {a:10, b:9, c:8, d:1}: mean 7, sample variance 50/3
    # d scores (1-7)^2/(50/3) = 2.16 on frequency and stays quiet short-term
    stats = stats_table(
        {"a": 10, "b": 9, "c": 8, "d": 1},
        {"a": 50, "b": 45, "c": 40, "d": 5},
    )
    assert detect_lurkers(stats, PARAMS) == ["d"]


def test_above_mean_outlier_is_not_a_lurker():
    # "a" has squared z-score 0.54 > 0.4 on frequency but sits above the mean
    stats = stats_table(
        {"a": 10, "b": 9, "c": 8, "d": 1},
        {"a": 50, "b": 45, "c": 40, "d": 5},
    )
    assert "a" not in detect_lurkers(stats, PARAMS)


def test_recent_speech_clears_lurker_flag():
    stats = stats_table(
        {"a": 10, "b": 9, "c": 8, "d": 1},
        {"a": 50, "b": 45, "c": 40, "d": 5},
        freq_short={"a": 0, "b": 0, "c": 0, "d": 1},  # spoke in the short window
    )
    assert detect_lurkers(stats, PARAMS) == []
    stats = stats_table(
        {"a": 10, "b": 9, "c": 8, "d": 1},
        {"a": 50, "b": 45, "c": 40, "d": 5},
        len_short={"a": 0, "b": 0, "c": 0, "d": 6},  # 6 words >= threshold 5
    )
    assert detect_lurkers(stats, PARAMS) == []


def test_uniform_group_has_no_lurkers():
    stats = stats_table(
        {"a": 5, "b": 5, "c": 5, "d": 5},
        {"a": 20, "b": 20, "c": 20, "d": 20},
    )
    assert detect_lurkers(stats, PARAMS) == []


def test_lurkers_sorted_quietest_first():
    stats = stats_table(
        {"a": 20, "b": 20, "c": 1, "d": 2},
        {"a": 100, "b": 100, "c": 4, "d": 4},
    )
    lurkers = detect_lurkers(stats, PARAMS)
    assert lurkers == ["c", "d"]


# --- probability formulas -------------------------------------------------------

def test_silence_probability_values():
    assert silence_probability(0) == 0.0
    assert silence_probability(1) == pytest.approx(1 / 1.2, abs=1e-12)
    assert silence_probability(2) == pytest.approx(2 / 2.2, abs=1e-12)
    with pytest.raises(ValueError):
        silence_probability(-1)


def test_semantic_probability_values():
    assert semantic_probability(0, 0) == 0.0
    assert semantic_probability(0, 1) == pytest.approx(0.4)
    assert semantic_probability(1, 0) == 1.0
    assert semantic_probability(1, 1) == 1.0


def test_chime_in_decision_threshold_strict():
    p, fires = chime_in_decision(ChimeInSignals(0, 0, 1), PARAMS)
    assert p == pytest.approx((1 / 1.2) / 2, abs=1e-12)
    assert not fires  # 0.4167 below threshold
    p, fires = chime_in_decision(ChimeInSignals(0, 1, 1), PARAMS)
    assert p == pytest.approx((1 / 1.2 + 0.4) / 2, abs=1e-12)
    assert fires
    # exact boundary: alpha=1, n=1 gives p_silence 0.5; with p_semantic 0.4
    # the mean is exactly the 0.45 threshold, and strict > must not fire
    boundary = PARAMS.replace(silence_alpha=1.0)
    p, fires = chime_in_decision(ChimeInSignals(0, 1, 1), boundary)
    assert p == pytest.approx(0.45, abs=1e-12)
    assert not fires


def test_classifier_parses_bits():
    gateway = LLMGateway(
        ScriptedProvider(script={"chime_classifier": ["hm\nANSWER: stuck=1 unsolve=0"]}),
        sleep=lambda _d: None,
    )
    w = [Utterance.make(1, "a", UtteranceKind.HUMAN, "hi", 0)]
    signals = classify_stuck_unsolved(w, gateway, n_silent=3)
    assert (signals.b_stuck, signals.b_unsolve, signals.n_silent) == (1, 0, 3)


def test_classifier_garbage_degrades_to_calm():
    gateway = LLMGateway(
        ScriptedProvider(script={"chime_classifier": ["no bits here"]}),
        sleep=lambda _d: None,
    )
    w = [Utterance.make(1, "a", UtteranceKind.HUMAN, "hi", 0)]
    signals = classify_stuck_unsolved(w, gateway)
    assert (signals.b_stuck, signals.b_unsolve) == (0, 0)


# --- transition / conflict conditions ---------------------------------------------

def test_transition_ask_interest_when_uptake_narrow():
    assert subtopic_transition_condition(1, 1, 4) == TransitionHint.ASK_INTEREST
    assert subtopic_transition_condition(0, 0, 4) == TransitionHint.ASK_INTEREST


def test_transition_propose_next_when_attention_fades():
    assert subtopic_transition_condition(4, 1, 4) == TransitionHint.PROPOSE_NEXT
    assert subtopic_transition_condition(2, 0, 4) == TransitionHint.PROPOSE_NEXT


def test_transition_boundaries_are_strict():
    assert subtopic_transition_condition(2, 1, 4) is None  # N_ed == P/2, N_ing == N_ed/2
    assert subtopic_transition_condition(4, 2, 4) is None
    assert subtopic_transition_condition(3, 2, 4) is None


def test_conflict_stall_from_session_start():
    history = [(0, 0)]
    assert not conflict_resolution_condition(history, 35, 4)
    assert conflict_resolution_condition(history, 36, 4)
    assert conflict_resolution_condition(history, 200, 4)


def test_conflict_stall_resets_on_progress():
    history = [(0, 0), (10, 1)]
    # last increase recorded at index 10: stalls again exactly at 10 + 36
    assert not conflict_resolution_condition(history, 45, 4)
    assert conflict_resolution_condition(history, 46, 4)


def test_conflict_stall_window_override():
    history = [(0, 0)]
    assert conflict_resolution_condition(history, 5, 4, stall_window=5)
    assert not conflict_resolution_condition(history, 4, 4, stall_window=5)


def test_summarization_condition_counts_active_speakers():
    assert initiative_summarization_condition({"a", "b"}, PARAMS)
    assert not initiative_summarization_condition({"a"}, PARAMS)


# --- gating -----------------------------------------------------------------------

def advance(state: TriggerState, to_index: int):
    while state.utterance_index < to_index:
        state.note_human(f"u{state.utterance_index % 4}")


def test_summarization_gate_warmup_and_cooldown():
    state = TriggerState()
    advance(state, 43)
    assert not gate(Strategy.INITIATIVE_SUMMARIZATION, state, PARAMS)
    advance(state, 44)  # warm-up 11 * 4
    assert gate(Strategy.INITIATIVE_SUMMARIZATION, state, PARAMS)
    state.commit_fire(Strategy.INITIATIVE_SUMMARIZATION)
    advance(state, 91)
    assert not gate(Strategy.INITIATIVE_SUMMARIZATION, state, PARAMS)
    advance(state, 92)  # cool-down 12 * 4 after firing at 44
    assert gate(Strategy.INITIATIVE_SUMMARIZATION, state, PARAMS)


def test_encouragement_per_target_growing_cooldown():
    state = TriggerState()
    advance(state, 12)  # warm-up 3 * 4
    assert gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="dee")
    state.commit_fire(Strategy.PARTICIPATION_ENCOURAGEMENT, "dee")
    advance(state, 13)
    assert not gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="dee")
    advance(state, 14)  # cool-down grew to 2
    assert gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="dee")
    state.commit_fire(Strategy.PARTICIPATION_ENCOURAGEMENT, "dee")
    advance(state, 17)
    assert not gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="dee")
    advance(state, 18)  # now 4
    assert gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="dee")
    # an unrelated participant has a fresh zero cool-down
    assert gate(Strategy.PARTICIPATION_ENCOURAGEMENT, state, PARAMS, target="amy")


def test_direct_and_chime_bypass_gating():
    state = TriggerState()  # index 0, nothing warmed up
    assert gate(Strategy.DIRECT_CHATTING, state, PARAMS)
    assert gate(Strategy.IN_CONTEXT_CHIME_IN, state, PARAMS)


def test_summarization_clears_active_set_on_fire():
    state = TriggerState()
    state.note_human("a")
    state.note_human("b")
    assert state.active_since_last_summary == {"a", "b"}
    state.commit_fire(Strategy.INITIATIVE_SUMMARIZATION)
    assert state.active_since_last_summary == set()


# --- arbitration ---------------------------------------------------------------------

def test_arbitrate_picks_lowest_rank():
    conditions = {s: False for s in Strategy}
    gates = {s: True for s in Strategy}
    conditions[Strategy.CONFLICT_RESOLUTION] = True
    conditions[Strategy.PARTICIPATION_ENCOURAGEMENT] = True
    assert arbitrate(conditions, gates) is Strategy.PARTICIPATION_ENCOURAGEMENT


def test_arbitrate_direct_chat_always_wins():
    conditions = {s: True for s in Strategy}
    gates = {s: True for s in Strategy}
    assert arbitrate(conditions, gates) is Strategy.DIRECT_CHATTING


def test_arbitrate_falls_back_to_keep_silent():
    conditions = {s: False for s in Strategy}
    gates = {s: True for s in Strategy}
    assert arbitrate(conditions, gates) is Strategy.KEEP_SILENT
    conditions = {s: True for s in Strategy}
    gates = {s: False for s in Strategy}
    assert arbitrate(conditions, gates) is Strategy.KEEP_SILENT


def test_arbitrate_gate_blocks_condition():
    conditions = {s: False for s in Strategy}
    gates = {s: True for s in Strategy}
    conditions[Strategy.INITIATIVE_SUMMARIZATION] = True
    conditions[Strategy.SUBTOPIC_TRANSITION] = True
    gates[Strategy.INITIATIVE_SUMMARIZATION] = False
    assert arbitrate(conditions, gates) is Strategy.SUBTOPIC_TRANSITION


def test_arbitrate_respects_rank_overrides():
    conditions = {s: False for s in Strategy}
    gates = {s: True for s in Strategy}
    conditions[Strategy.INITIATIVE_SUMMARIZATION] = True
    conditions[Strategy.IN_CONTEXT_CHIME_IN] = True
    ranks = {Strategy.IN_CONTEXT_CHIME_IN: 0}
    assert arbitrate(conditions, gates, ranks) is Strategy.IN_CONTEXT_CHIME_IN


def test_arbitrate_matches_bruteforce_reference():
    rng = random.Random(99)
    active = [s for s in Strategy if s is not Strategy.KEEP_SILENT]
    for _ in range(2000):
        conditions = {s: rng.random() < 0.5 for s in Strategy}
        gates = {s: rng.random() < 0.5 for s in Strategy}
        eligible = [s for s in active if conditions[s] and gates[s]]
        expected = min(eligible, key=int) if eligible else Strategy.KEEP_SILENT
        assert arbitrate(conditions, gates) is expected
