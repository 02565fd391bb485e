"""Sub-topic generation, run once before the chat starts."""

from __future__ import annotations

import logging

from .core import SessionConfig, SubTopic
from .llm import LLMGateway, ParseError, parse_lines
from .prompts import SUBTOPIC_SEED

log = logging.getLogger(__name__)

MAX_SUBTOPICS = 6


class SubtopicGenerationError(RuntimeError):
    """The sub-topic list could not be produced (bad agenda or bad completions)."""


def _dedupe(titles: list[str]) -> list[str]:
    seen: set[str] = set()
    unique: list[str] = []
    for title in titles:
        key = title.strip().lower()
        if key and key not in seen:
            seen.add(key)
            unique.append(title.strip())
    return unique


def generate_subtopics(config: SessionConfig, gateway: LLMGateway) -> list[SubTopic]:
    """The session's fixed sub-topic list.

    An organiser agenda is authoritative: its items become the sub-topics
    verbatim and in order, no provider call involved. Otherwise the provider
    is asked for ``config.subtopic_count`` titles, with one re-prompt on a
    malformed completion. Duplicates are dropped case-insensitively; fewer
    than 2 surviving titles is an error, more than 6 agenda items as well.
    """
    if config.agenda:
        titles = _dedupe(list(config.agenda))
        if len(titles) > MAX_SUBTOPICS:
            raise SubtopicGenerationError(
                f"agenda has {len(titles)} items, at most {MAX_SUBTOPICS} are supported"
            )
        if len(titles) < 2:
            raise SubtopicGenerationError("agenda must contain at least 2 distinct items")
        return [SubTopic(i, title) for i, title in enumerate(titles)]

    bindings = {
        "topic": config.topic,
        "hints": config.hints or "(none)",
        "attendee_roles": config.attendee_roles or "(unknown)",
        "count": str(config.subtopic_count),
    }
    last_error: ParseError | None = None
    for attempt in range(2):  # one re-prompt on parse failure
        completion = gateway.generate(SUBTOPIC_SEED, bindings)
        try:
            titles = parse_lines(completion, expected_count=config.subtopic_count)
        except ParseError as exc:
            last_error = exc
            log.warning("sub-topic completion malformed (attempt %d): %s", attempt + 1, exc)
            continue
        titles = _dedupe(titles)
        if len(titles) < 2:
            last_error = ParseError("fewer than 2 distinct sub-topics", raw=completion)
            log.warning("sub-topic completion degenerate (attempt %d)", attempt + 1)
            continue
        return [SubTopic(i, title) for i, title in enumerate(titles)]
    raise SubtopicGenerationError(f"could not generate sub-topics: {last_error}")
