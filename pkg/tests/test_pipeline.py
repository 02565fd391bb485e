"""Cycle cadence, ping handling, response commits, and replay."""

import pytest

from facilichat.arbitrator import Strategy
from facilichat.core import Profile, TopicInputs, UtteranceKind, derive_config
from facilichat.llm import LLMGateway, ScriptedProvider
from facilichat.persistence import SessionLog, load_session
from facilichat.pipeline import SessionPipeline, counter_clock, replay_session

CALM_SCRIPT = {
    "topic_summaries": "ANSWER:\n1. early venue ideas\n2. nothing yet",
    "subtopic_status": "ANSWER:\n1: being discussed\n2: not discussed",
    "discussed_subtopics": "ANSWER:\nvenue",
    "summary_merge": "ANSWER: shared a venue idea",
    "chime_classifier": "ANSWER: stuck=0 unsolve=0",
    "direct_chat": "ANSWER: happy to help with that.",
    "chime_in": "ANSWER: maybe compare the two venues by cost first?",
}


def make_pipeline(script=None, n_exe=3, session_log=None):
    config = derive_config(
        4,
        Profile.SMALL,
        TopicInputs(topic="plan the fair", agenda=("venue", "budget")),
    )
    if n_exe != config.n_exe:
        from dataclasses import replace

        config = replace(config, n_exe=n_exe)
    gateway = LLMGateway(
        ScriptedProvider(script=script if script is not None else CALM_SCRIPT),
        sleep=lambda _d: None,
    )
    pipeline = SessionPipeline(
        config, gateway, clock=counter_clock(), session_log=session_log
    )
    for name in ("amy", "bo", "cat", "dee"):
        pipeline.register_participant(name)
    pipeline.initialize()
    return pipeline


def test_initialize_only_once():
    pipeline = make_pipeline()
    with pytest.raises(RuntimeError):
        pipeline.initialize()


def test_cycle_due_every_n_exe_human_messages():
    pipeline = make_pipeline()
    speakers = ["amy", "bo", "cat", "dee"]
    due_at = []
    for i in range(12):
        result = pipeline.add_human(speakers[i % 4], f"message {i} words")
        if result.cycle_due:
            due_at.append(i + 1)
    assert due_at == [3, 6, 9, 12]


def test_ping_does_not_advance_cycle_counter():
    pipeline = make_pipeline()
    pipeline.add_human("amy", "first message here")
    result = pipeline.add_human("bo", "hey @mubot what is the agenda?")
    assert result.is_ping and not result.cycle_due
    # two more non-ping messages complete the window of three
    assert not pipeline.add_human("cat", "second regular").cycle_due
    assert pipeline.add_human("dee", "third regular").cycle_due


def test_ping_cycle_forces_direct_chat():
    pipeline = make_pipeline()
    pipeline.add_human("amy", "warm up message")
    result = pipeline.add_human("bo", "@mubot hello?")
    bot = pipeline.run_cycle_and_commit(result.utterance)
    assert bot is not None
    assert bot.kind is UtteranceKind.BOT
    assert bot.text == "happy to help with that."
    decision = pipeline.decisions[-1]
    assert decision.chosen is Strategy.DIRECT_CHATTING
    assert decision.forced
    # ping cycles skip the stuck/unsolved classifier
    assert pipeline.gateway.provider.calls_for("chime_classifier") == 0


def test_ids_strictly_increase_across_kinds():
    pipeline = make_pipeline()
    ids = []
    for i in range(3):
        ids.append(pipeline.add_human("amy" if i % 2 else "bo", f"msg {i}").utterance.id)
    outcome = pipeline.run_cycle()
    if outcome.response:
        ids.append(pipeline.commit_bot_message(outcome.response).id)
    assert ids == sorted(ids)
    assert len(set(ids)) == len(ids)


def test_empty_response_downgrades_to_keep_silent():
    script = dict(CALM_SCRIPT)
    script["chime_classifier"] = "ANSWER: stuck=1 unsolve=1"
    script["chime_in"] = "ANSWER:\n"  # strategy chosen, nothing generated
    pipeline = make_pipeline(script)
    for i, name in enumerate(("amy", "bo", "cat")):
        pipeline.add_human(name, f"some words {i}")
    outcome = pipeline.run_cycle()
    assert outcome.response == ""
    assert outcome.decision.chosen is Strategy.KEEP_SILENT
    assert outcome.decision.downgraded
    # silence streak grows because nothing was said
    assert pipeline.trigger.n_silent == 1


def test_n_silent_resets_on_any_bot_message():
    pipeline = make_pipeline()
    pipeline.trigger.n_silent = 4
    pipeline.commit_bot_message("something helpful")
    assert pipeline.trigger.n_silent == 0


def test_single_participant_cycle_stays_silent_but_answers_pings():
    config = derive_config(
        4,
        Profile.SMALL,
        TopicInputs(topic="plan the fair", agenda=("venue", "budget")),
    )
    gateway = LLMGateway(ScriptedProvider(script=CALM_SCRIPT), sleep=lambda _d: None)
    pipeline = SessionPipeline(config, gateway, clock=counter_clock())
    pipeline.initialize()
    # only one human ever speaks: statistics are undefined, no crash allowed
    for i in range(3):
        result = pipeline.add_human("amy", f"talking to myself {i}")
    assert result.cycle_due
    outcome = pipeline.run_cycle()
    assert outcome.decision.chosen is Strategy.KEEP_SILENT
    assert outcome.response == ""
    ping = pipeline.add_human("amy", "@mubot anyone here?")
    bot = pipeline.run_cycle_and_commit(ping.utterance)
    assert bot is not None and bot.text == "happy to help with that."


def test_overlapping_cycles_rejected():
    pipeline = make_pipeline()
    pipeline.add_human("amy", "hello world")
    pipeline._in_cycle = True
    with pytest.raises(RuntimeError):
        pipeline.run_cycle()


def test_cycle_count_invariant_with_pings():
    pipeline = make_pipeline()
    speakers = ["amy", "bo", "cat", "dee"]
    pings = 0
    non_ping = 0
    for i in range(20):
        if i in (4, 11):
            result = pipeline.add_human(speakers[i % 4], "@mubot please advise")
            pings += 1
        else:
            result = pipeline.add_human(speakers[i % 4], f"regular message {i}")
            non_ping += 1
        if result.is_ping:
            pipeline.run_cycle_and_commit(result.utterance)
        elif result.cycle_due:
            pipeline.run_cycle_and_commit()
    assert len(pipeline.decisions) == non_ping // 3 + pings


def test_replay_reproduces_session(tmp_path):
    log_path = tmp_path / "session.jsonl"
    session_log = SessionLog(log_path)
    pipeline = make_pipeline(session_log=session_log)
    pipeline.gateway.record_hook = session_log.append_llm
    speakers = ["amy", "bo", "cat", "dee"]
    for i in range(9):
        text = "@mubot summary please" if i == 4 else f"regular message {i} here"
        result = pipeline.add_human(speakers[i % 4], text)
        if result.is_ping:
            pipeline.run_cycle_and_commit(result.utterance)
        elif result.cycle_due:
            pipeline.run_cycle_and_commit()
    session_log.close()

    loaded = load_session(log_path)
    _replayed, report = replay_session(loaded)
    assert report.ok, (report.decision_mismatches, report.transcript_mismatches)
    assert report.cycles == len(loaded.decisions)


def test_replay_flags_divergence(tmp_path):
    log_path = tmp_path / "session.jsonl"
    session_log = SessionLog(log_path)
    pipeline = make_pipeline(session_log=session_log)
    pipeline.gateway.record_hook = session_log.append_llm
    speakers = ["amy", "bo", "cat", "dee"]
    for i in range(6):
        result = pipeline.add_human(speakers[i % 4], f"regular message {i} here")
        if result.cycle_due:
            pipeline.run_cycle_and_commit()
    session_log.close()

    loaded = load_session(log_path)
    # tamper with a recorded completion so the replayed decisions diverge
    for record in loaded.llm_records:
        if record["template"] == "chime_classifier":
            record["completion"] = "ANSWER: stuck=1 unsolve=1"
    _replayed, report = replay_session(loaded)
    assert not report.ok
