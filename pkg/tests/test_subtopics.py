"""Sub-topic generation: agenda passthrough, provider parsing, re-prompting."""

import pytest

from facilichat.core import Profile, TopicInputs, derive_config
from facilichat.llm import LLMGateway, ScriptedProvider
from facilichat.subtopics import SubtopicGenerationError, generate_subtopics


def make_config(agenda=None, subtopic_count=3):
    return derive_config(
        4,
        Profile.SMALL,
        TopicInputs(topic="community garden kickoff", agenda=agenda),
        subtopic_count=subtopic_count,
    )


def gateway_for(script):
    return LLMGateway(ScriptedProvider(script=script), sleep=lambda _d: None)


def test_agenda_items_become_subtopics_verbatim():
    config = make_config(agenda=("venue choice", "sponsor list", "exchange rules"))
    topics = generate_subtopics(config, gateway_for({}))
    assert [t.title for t in topics] == ["venue choice", "sponsor list", "exchange rules"]
    assert [t.index for t in topics] == [0, 1, 2]


def test_agenda_deduplicated_case_insensitively():
    config = make_config(agenda=("Venue", "venue", "budget"))
    topics = generate_subtopics(config, gateway_for({}))
    assert [t.title for t in topics] == ["Venue", "budget"]


def test_agenda_with_too_many_items_rejected():
    config = make_config(agenda=tuple(f"item {i}" for i in range(7)))
    with pytest.raises(SubtopicGenerationError):
        generate_subtopics(config, gateway_for({}))


def test_agenda_with_single_distinct_item_rejected():
    config = make_config(agenda=("venue", "VENUE"))
    with pytest.raises(SubtopicGenerationError):
        generate_subtopics(config, gateway_for({}))


def test_generated_subtopics_parsed_from_numbered_lines():
    gateway = gateway_for({"subtopic_seed": ["1. plot layout\n2. tool sharing\n3. watering schedule"]})
    topics = generate_subtopics(make_config(), gateway)
    assert [t.title for t in topics] == ["plot layout", "tool sharing", "watering schedule"]


def test_malformed_completion_reprompted_once():
    gateway = gateway_for(
        {"subtopic_seed": ["just one line", "1. a thing\n2. b thing\n3. c thing"]}
    )
    topics = generate_subtopics(make_config(), gateway)
    assert [t.title for t in topics] == ["a thing", "b thing", "c thing"]
    assert gateway.provider.calls_for("subtopic_seed") == 2


def test_two_bad_completions_is_an_error():
    gateway = gateway_for({"subtopic_seed": ["nope", "still nope"]})
    with pytest.raises(SubtopicGenerationError):
        generate_subtopics(make_config(), gateway)


def test_generated_duplicates_dropped_but_two_suffice():
    gateway = gateway_for({"subtopic_seed": ["1. venue\n2. Venue\n3. budget"]})
    topics = generate_subtopics(make_config(), gateway)
    assert [t.title for t in topics] == ["venue", "budget"]
