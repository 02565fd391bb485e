"""Conversation metrics over persisted session logs.

All word counting covers human utterances only; bot and system messages are
excluded everywhere. Consensus comes from a sidecar annotations file because
whether a group actually agreed is a judgement call, not a string match.
"""

from __future__ import annotations

import glob as globlib
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .core import Utterance, UtteranceKind
from .persistence import LoadedSession, load_session


class MetricsError(ValueError):
    """Empty or degenerate input that makes a metric meaningless."""


def _human(transcript: Sequence[Utterance]) -> list[Utterance]:
    return [u for u in transcript if u.kind is UtteranceKind.HUMAN]


def words_per_conversation(transcripts: Sequence[Sequence[Utterance]]) -> float:
    """Mean over transcripts of the total human word count."""
    if not transcripts:
        raise MetricsError("no transcripts")
    totals = [sum(u.word_count for u in _human(t)) for t in transcripts]
    return statistics.fmean(totals)


def words_per_utterance(transcripts: Sequence[Sequence[Utterance]]) -> float:
    """Pooled human words divided by pooled human utterance count."""
    utterances = [u for t in transcripts for u in _human(t)]
    if not utterances:
        raise MetricsError("no human utterances")
    return sum(u.word_count for u in utterances) / len(utterances)


def evenness_std_pct(
    transcript: Sequence[Utterance], participants: Sequence[str] | None = None
) -> float:
    """Spread of speaking volume: sample standard deviation of per-participant
    word totals as a percentage of their mean. Lower is more even.

    Without an explicit roster the distinct human senders are used; roster
    members who never spoke count as zero.
    """
    humans = _human(transcript)
    roster = list(participants) if participants else sorted({u.sender for u in humans})
    if len(roster) < 2:
        raise MetricsError("evenness needs at least 2 participants")
    totals = {name: 0 for name in roster}
    for utt in humans:
        if utt.sender in totals:
            totals[utt.sender] += utt.word_count
    values = [float(totals[name]) for name in roster]
    mean = statistics.fmean(values)
    if mean == 0.0:
        raise MetricsError("nobody on the roster said anything")
    return 100.0 * statistics.stdev(values) / mean


def consensus_rate(agreements: int, tasks: int) -> float:
    """Share of tasks that reached agreement, in percent, one decimal."""
    if tasks <= 0:
        raise MetricsError("tasks must be > 0")
    if not 0 <= agreements <= tasks:
        raise MetricsError("agreements must be between 0 and tasks")
    return round(100.0 * agreements / tasks, 1)


@dataclass
class SessionMetrics:
    path: str
    human_utterances: int
    human_words: int
    words_per_utterance: float
    evenness_pct: float | None
    consensus: bool | None


@dataclass
class Report:
    sessions: list[SessionMetrics] = field(default_factory=list)
    words_per_conversation: float = 0.0
    words_per_utterance: float = 0.0
    consensus_rate_pct: float | None = None

    def render(self) -> str:
        lines = [
            "conversation metrics",
            "--------------------",
            f"sessions:               {len(self.sessions)}",
            f"words per conversation: {self.words_per_conversation:.1f}",
            f"words per utterance:    {self.words_per_utterance:.1f}",
        ]
        if self.consensus_rate_pct is not None:
            lines.append(f"consensus rate:         {self.consensus_rate_pct:.1f}%")
        lines.append("")
        for s in self.sessions:
            evenness = f"{s.evenness_pct:.1f}%" if s.evenness_pct is not None else "n/a"
            consensus = "-" if s.consensus is None else ("yes" if s.consensus else "no")
            lines.append(
                f"{s.path}: {s.human_utterances} utterances, {s.human_words} words, "
                f"evenness {evenness}, consensus {consensus}"
            )
        return "\n".join(lines) + "\n"


def load_annotations(path: str | Path | None) -> dict[str, bool]:
    """Sidecar consensus annotations: {"<log basename or path>": true/false}."""
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, Mapping):
        raise MetricsError("annotations file must hold a JSON object")
    return {str(k): bool(v) for k, v in data.items()}


def _annotation_for(path: str, annotations: Mapping[str, bool]) -> bool | None:
    if path in annotations:
        return annotations[path]
    return annotations.get(Path(path).name)


def analyze_sessions(
    sessions: Mapping[str, LoadedSession], annotations: Mapping[str, bool]
) -> Report:
    report = Report()
    transcripts: list[list[Utterance]] = []
    judged: list[bool] = []
    for path, loaded in sessions.items():
        humans = _human(loaded.utterances)
        words = sum(u.word_count for u in humans)
        try:
            evenness = evenness_std_pct(loaded.utterances)
        except MetricsError:
            evenness = None
        verdict = _annotation_for(path, annotations)
        report.sessions.append(
            SessionMetrics(
                path=path,
                human_utterances=len(humans),
                human_words=words,
                words_per_utterance=(words / len(humans)) if humans else 0.0,
                evenness_pct=evenness,
                consensus=verdict,
            )
        )
        transcripts.append(loaded.utterances)
        if verdict is not None:
            judged.append(verdict)
    report.words_per_conversation = words_per_conversation(transcripts)
    report.words_per_utterance = words_per_utterance(transcripts)
    if judged:
        report.consensus_rate_pct = consensus_rate(sum(judged), len(judged))
    return report


def analyze_logs(
    log_paths: Iterable[str] | str, annotations_path: str | None = None
) -> Report:
    """Analyze session logs matched by a glob pattern (or an explicit list)."""
    if isinstance(log_paths, str):
        paths = sorted(globlib.glob(log_paths))
    else:
        paths = list(log_paths)
    if not paths:
        raise MetricsError("no session logs matched")
    annotations = load_annotations(annotations_path)
    sessions = {path: load_session(path) for path in paths}
    return analyze_sessions(sessions, annotations)
