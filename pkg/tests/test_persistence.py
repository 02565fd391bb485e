"""Session log round-trips and crash behaviour."""

import json

import pytest

from facilichat.arbitrator import Strategy, StrategyDecision
from facilichat.core import Profile, TopicInputs, Utterance, UtteranceKind, derive_config
from facilichat.persistence import (
    SessionLog,
    config_from_dict,
    config_to_dict,
    decision_from_dict,
    decision_to_dict,
    load_session,
    persist,
    utterance_from_dict,
    utterance_to_dict,
)

CONFIG = derive_config(
    4,
    Profile.SMALL,
    TopicInputs(
        topic="spring fair",
        agenda=("venue", "budget"),
        hints="keep it cheap",
        attendee_roles="organisers and volunteers",
    ),
    random_seed=7,
)


def sample_decision():
    return StrategyDecision(
        cycle_index=3,
        utterance_index=9,
        chosen=Strategy.IN_CONTEXT_CHIME_IN,
        conditions={s: s is Strategy.IN_CONTEXT_CHIME_IN for s in Strategy},
        gates={s: True for s in Strategy},
        eligible=[Strategy.IN_CONTEXT_CHIME_IN],
        p_silence=0.8333333333,
        p_semantic=0.4,
        p_chime=0.6166666667,
    )


def test_config_roundtrip():
    data = config_to_dict(CONFIG)
    back = config_from_dict(json.loads(json.dumps(data)))
    assert back == CONFIG


def test_utterance_roundtrip():
    utt = Utterance.make(5, "amy", UtteranceKind.HUMAN, "hello out there", 12345)
    assert utterance_from_dict(utterance_to_dict(utt)) == utt


def test_decision_roundtrip():
    decision = sample_decision()
    back = decision_from_dict(json.loads(json.dumps(decision_to_dict(decision))))
    assert back.chosen is Strategy.IN_CONTEXT_CHIME_IN
    assert back.cycle_index == 3
    assert back.utterance_index == 9
    assert back.conditions[Strategy.IN_CONTEXT_CHIME_IN] is True
    assert back.p_chime == pytest.approx(0.6166666667)


def test_session_log_flushes_every_append(tmp_path):
    path = tmp_path / "chat.jsonl"
    log = SessionLog(path)
    log.append_session(CONFIG)
    log.append_utterance(Utterance.make(1, "amy", UtteranceKind.HUMAN, "hi", 0))
    # readable mid-session without close: every append is flushed
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["record"] == "session"
    assert json.loads(lines[1])["record"] == "utterance"
    log.close()


def test_session_log_keys_sorted_for_stable_diffs(tmp_path):
    path = tmp_path / "chat.jsonl"
    log = SessionLog(path)
    log.append_utterance(Utterance.make(1, "amy", UtteranceKind.HUMAN, "hi", 0))
    log.close()
    line = path.read_text().splitlines()[0]
    keys = list(json.loads(line))
    assert keys == sorted(keys)


def test_session_log_write_failure_keeps_buffer(tmp_path):
    path = tmp_path / "chat.jsonl"
    log = SessionLog(path)
    log._fh.close()  # simulate the disk going away mid-session
    log.append_utterance(Utterance.make(1, "amy", UtteranceKind.HUMAN, "hi", 0))
    assert log.write_errors >= 1
    assert len(log.buffer) == 1  # record survives in memory for recovery


def test_session_log_none_path_is_memory_only():
    log = SessionLog(None)
    log.append_utterance(Utterance.make(1, "amy", UtteranceKind.HUMAN, "hi", 0))
    assert len(log.buffer) == 1
    log.close()


def test_load_session_roundtrip(tmp_path):
    path = tmp_path / "chat.jsonl"
    transcript = [
        Utterance.make(1, "amy", UtteranceKind.HUMAN, "hello", 0),
        Utterance.make(2, "mubot", UtteranceKind.BOT, "hi amy", 1000),
    ]
    persist(transcript, [sample_decision()], path, config=CONFIG)
    loaded = load_session(path)
    assert loaded.config == CONFIG
    assert loaded.utterances == transcript
    assert len(loaded.decisions) == 1
    assert loaded.decisions[0].chosen is Strategy.IN_CONTEXT_CHIME_IN


def test_load_session_skips_unknown_kinds(tmp_path):
    path = tmp_path / "chat.jsonl"
    path.write_text(
        '{"record":"mystery","x":1}\n'
        '{"record":"utterance","id":1,"kind":"human","sender":"a","text":"hi","ts":0,"word_count":1}\n'
    )
    loaded = load_session(path)
    assert len(loaded.utterances) == 1


def test_load_session_corrupt_line_raises(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind":"session"\n')
    with pytest.raises(ValueError, match="corrupt"):
        load_session(path)
