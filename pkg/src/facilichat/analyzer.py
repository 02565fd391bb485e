"""Dialog analysis: sub-topic progress, per-participant notes, speaking stats.

Four passes run over the transcript each execution cycle, in this order:
status update (two chained completions), currently-discussed extraction,
per-(participant, sub-topic) note merging, and the pure-statistics
participant features. Completions that fail to parse leave state untouched
for the cycle; the pipeline only ever moves forward on clean data.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import (
    SessionConfig,
    SubTopic,
    TopicStatus,
    Utterance,
    UtteranceKind,
    window,
)
from .llm import (
    LLMGateway,
    ParseError,
    ProviderUnavailableError,
    extract_answer,
    parse_lines,
    parse_status_labels,
)
from .prompts import (
    DISCUSSED_SUBTOPICS,
    SUBTOPIC_STATUS,
    SUMMARY_MERGE,
    TOPIC_SUMMARIES,
    render_context,
    render_subtopics,
    render_window,
)

log = logging.getLogger(__name__)


@dataclass
class TopicRecord:
    """Mutable per-sub-topic slice of the session state."""

    subtopic: SubTopic
    status: TopicStatus = TopicStatus.NOT_DISCUSSED
    summary: str = ""
    ever_discussed: set[str] = field(default_factory=set)

    @property
    def n_ever_discussed(self) -> int:
        return len(self.ever_discussed)


class SubTopicState:
    """Status, running summary and engagement bookkeeping per sub-topic.

    Engagement attribution is incremental: every human utterance is counted
    toward the sub-topics under discussion at most once, no matter how often
    analysis windows overlap it.
    """

    def __init__(self, subtopics: Sequence[SubTopic]):
        if not subtopics:
            raise ValueError("at least one sub-topic required")
        self.records: dict[int, TopicRecord] = {
            topic.index: TopicRecord(topic) for topic in subtopics
        }
        self.interest: dict[str, dict[int, int]] = {}
        self._last_attributed_id = 0

    @property
    def subtopics(self) -> list[SubTopic]:
        return [record.subtopic for record in self.records.values()]

    def statuses(self) -> dict[int, TopicStatus]:
        return {index: record.status for index, record in self.records.items()}

    def well_discussed_count(self) -> int:
        return sum(
            1 for r in self.records.values() if r.status is TopicStatus.WELL_DISCUSSED
        )

    def apply_statuses(self, parsed: Mapping[int, TopicStatus]) -> None:
        """Merge parsed statuses; a status never moves backwards."""
        for index, status in parsed.items():
            record = self.records.get(index)
            if record is None:
                continue
            if status.order > record.status.order:
                record.status = status
            elif status.order < record.status.order:
                log.warning(
                    "ignoring status regression for sub-topic %d: %s -> %s",
                    index,
                    record.status.value,
                    status.value,
                )

    def attribute(self, short_window: Sequence[Utterance], discussed: Sequence[SubTopic]) -> None:
        """Credit window speakers to the sub-topics currently under discussion.

        All human speakers of the window extend ever_discussed (idempotent);
        per-participant interest counters only grow for utterances newer than
        the previous attribution pass.
        """
        humans = [u for u in short_window if u.kind is UtteranceKind.HUMAN]
        if not humans or not discussed:
            self._last_attributed_id = max(
                self._last_attributed_id, max((u.id for u in humans), default=0)
            )
            return
        indices = [topic.index for topic in discussed]
        for utt in humans:
            for index in indices:
                self.records[index].ever_discussed.add(utt.sender)
            if utt.id > self._last_attributed_id:
                counters = self.interest.setdefault(utt.sender, {})
                for index in indices:
                    counters[index] = counters.get(index, 0) + 1
        self._last_attributed_id = max(self._last_attributed_id, humans[-1].id)

    def focal_topic(self) -> TopicRecord | None:
        """The being-discussed record with the widest engagement (ties: lowest index)."""
        candidates = [
            r for r in self.records.values() if r.status is TopicStatus.BEING_DISCUSSED
        ]
        if not candidates:
            return None
        return max(candidates, key=lambda r: (r.n_ever_discussed, -r.subtopic.index))

    def render_statuses(self) -> str:
        return "\n".join(
            f"{r.subtopic.index + 1}. {r.subtopic.title}: {r.status.value}"
            for r in self.records.values()
        )

    def render_summaries(self) -> str:
        return "\n".join(
            f"{r.subtopic.index + 1}. {r.summary or '(nothing yet)'}"
            for r in self.records.values()
        )


class AccumulativeSummary:
    """One short running note per (participant, sub-topic) cell."""

    def __init__(self) -> None:
        self.cells: dict[tuple[str, int], str] = {}

    def get(self, participant: str, topic_index: int) -> str:
        return self.cells.get((participant, topic_index), "")

    def set(self, participant: str, topic_index: int, text: str) -> None:
        self.cells[(participant, topic_index)] = text

    def for_participant(self, participant: str) -> dict[int, str]:
        return {
            index: text
            for (name, index), text in self.cells.items()
            if name == participant and text
        }

    def render(self, subtopics: Sequence[SubTopic]) -> str:
        titles = {topic.index: topic.title for topic in subtopics}
        lines = [
            f"{name} on {titles.get(index, f'#{index + 1}')}: {text}"
            for (name, index), text in sorted(self.cells.items())
            if text
        ]
        return "\n".join(lines) if lines else "(no notes yet)"


def update_subtopic_status(
    state: SubTopicState,
    config: SessionConfig,
    short_window: Sequence[Utterance],
    gateway: LLMGateway,
) -> SubTopicState:
    """Two-stage status refresh: rewrite per-sub-topic summaries, then relabel.

    Applies atomically; if either completion fails to parse the whole state is
    left unchanged for this cycle and a warning is logged. An empty window is
    a no-op without provider calls.
    """
    if not short_window:
        return state
    subtopics = state.subtopics
    window_text = render_window(list(short_window))
    try:
        summary_completion = gateway.generate(
            TOPIC_SUMMARIES,
            {
                "topic": config.topic,
                "context": render_context(config.topic_inputs),
                "subtopics": render_subtopics(subtopics),
                "prev_summaries": state.render_summaries(),
                "window": window_text,
            },
        )
        summaries = parse_lines(
            extract_answer(summary_completion), expected_count=len(subtopics)
        )
        status_completion = gateway.generate(
            SUBTOPIC_STATUS,
            {
                "prev_status": state.render_statuses(),
                "summaries": "\n".join(
                    f"{i + 1}. {line}" for i, line in enumerate(summaries)
                ),
                "window": window_text,
            },
        )
        parsed = parse_status_labels(status_completion, subtopics)
    except ParseError as exc:
        log.warning("status update skipped this cycle, completion malformed: %s", exc)
        return state
    except ProviderUnavailableError as exc:
        log.warning("status update skipped this cycle, provider failed: %s", exc)
        return state
    for record, summary in zip(state.records.values(), summaries):
        record.summary = summary
    state.apply_statuses(parsed)
    return state


def extract_discussed_subtopics(
    state: SubTopicState,
    short_window: Sequence[Utterance],
    gateway: LLMGateway,
) -> list[SubTopic]:
    """The subset of sub-topics the window is actually about (possibly empty).

    Completion lines must echo known titles; unknown ones are dropped with a
    warning. Results keep catalogue order and carry no duplicates.
    """
    if not short_window:
        return []
    subtopics = state.subtopics
    try:
        completion = gateway.generate(
            DISCUSSED_SUBTOPICS,
            {
                "subtopics": render_subtopics(subtopics),
                "window": render_window(list(short_window)),
            },
        )
    except ProviderUnavailableError as exc:
        log.warning("discussed-sub-topic extraction failed, assuming none: %s", exc)
        return []
    by_title = {topic.title.lower(): topic for topic in subtopics}
    picked: set[int] = set()
    for line in parse_lines(extract_answer(completion)):
        topic = by_title.get(line.lower())
        if topic is None:
            log.warning("ignoring unknown sub-topic title in completion: %r", line)
            continue
        picked.add(topic.index)
    return [topic for topic in subtopics if topic.index in picked]


def update_accumulative_summary(
    summary: AccumulativeSummary,
    discussed: Sequence[SubTopic],
    short_window: Sequence[Utterance],
    gateway: LLMGateway,
) -> AccumulativeSummary:
    """Merge the window into each (window speaker, discussed sub-topic) note.

    A failed or empty completion leaves the previous note in place.
    """
    speakers: list[str] = []
    for utt in short_window:
        if utt.kind is UtteranceKind.HUMAN and utt.sender not in speakers:
            speakers.append(utt.sender)
    if not speakers or not discussed:
        return summary
    window_text = render_window(list(short_window))
    for speaker in speakers:
        for topic in discussed:
            previous = summary.get(speaker, topic.index)
            try:
                completion = gateway.generate(
                    SUMMARY_MERGE,
                    {
                        "participant": speaker,
                        "subtopic": topic.title,
                        "prev_summary": previous or "(nothing yet)",
                        "window": window_text,
                    },
                )
            except ProviderUnavailableError as exc:
                log.warning(
                    "note merge failed for (%s, %s), keeping previous: %s",
                    speaker,
                    topic.title,
                    exc,
                )
                continue
            merged = extract_answer(completion).strip()
            if merged:
                summary.set(speaker, topic.index, merged)
    return summary


@dataclass(frozen=True)
class ParticipantStats:
    """Pure-statistics participant features computed from the two windows.

    freq counts a participant's utterances in the window, len their summed
    word counts. Aggregates are the roster mean and the (n-1) sample
    variance. Engagement maps are per sub-topic: n_ever_discussed counts
    everyone who has ever engaged with it, n_discussing the distinct speakers
    of the short window while it is under discussion.
    """

    participants: tuple[str, ...]
    freq_short: dict[str, int]
    len_short: dict[str, int]
    freq_long: dict[str, int]
    len_long: dict[str, int]
    freq_long_mean: float
    freq_long_var: float
    len_long_mean: float
    len_long_var: float
    n_ever_discussed: dict[int, int]
    n_discussing: dict[int, int]
    interest: dict[str, dict[int, int]]


def extract_participant_stats(
    transcript: Sequence[Utterance],
    config: SessionConfig,
    state: SubTopicState,
    discussed: Sequence[SubTopic],
    participants: Sequence[str],
) -> ParticipantStats:
    """Deterministic speaking statistics over the short and long windows."""
    if len(participants) < 2:
        raise ValueError("at least 2 participants required for statistics")
    short = [
        u for u in window(transcript, config.n_sw) if u.kind is UtteranceKind.HUMAN
    ]
    long = [
        u for u in window(transcript, config.n_lw) if u.kind is UtteranceKind.HUMAN
    ]
    roster = tuple(participants)

    def tally(utterances: list[Utterance]) -> tuple[dict[str, int], dict[str, int]]:
        freq = {name: 0 for name in roster}
        length = {name: 0 for name in roster}
        for utt in utterances:
            if utt.sender in freq:
                freq[utt.sender] += 1
                length[utt.sender] += utt.word_count
        return freq, length

    freq_short, len_short = tally(short)
    freq_long, len_long = tally(long)
    freq_values = [float(freq_long[name]) for name in roster]
    len_values = [float(len_long[name]) for name in roster]
    discussed_indices = {topic.index for topic in discussed}
    short_speakers = {u.sender for u in short}
    n_discussing = {
        index: (len(short_speakers) if index in discussed_indices else 0)
        for index in state.records
    }
    return ParticipantStats(
        participants=roster,
        freq_short=freq_short,
        len_short=len_short,
        freq_long=freq_long,
        len_long=len_long,
        freq_long_mean=statistics.fmean(freq_values),
        freq_long_var=statistics.variance(freq_values),
        len_long_mean=statistics.fmean(len_values),
        len_long_var=statistics.variance(len_values),
        n_ever_discussed={
            index: record.n_ever_discussed for index, record in state.records.items()
        },
        n_discussing=n_discussing,
        interest={name: dict(counters) for name, counters in state.interest.items()},
    )
