"""Shared domain types: session configuration, utterances, sub-topics, windows.

Everything here is plain data with validation; no I/O and no provider calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum, IntEnum
from typing import Iterable, Mapping, Sequence

__all__ = [
    "DEFAULT_BOT_KEYWORD",
    "ArbitrationParams",
    "InvalidConfigError",
    "Profile",
    "SessionConfig",
    "Strategy",
    "SubTopic",
    "TopicInputs",
    "TopicStatus",
    "Utterance",
    "UtteranceKind",
    "count_words",
    "derive_config",
    "round_half_up",
    "window",
]

DEFAULT_BOT_KEYWORD = "@mubot"


class InvalidConfigError(ValueError):
    """Session parameters violate the configuration rules."""


def count_words(text: str) -> int:
    """Number of whitespace-separated tokens in ``text``."""
    return len(text.split())


def round_half_up(x: float) -> int:
    """Round to the nearest integer, with .5 going up (3.5 -> 4)."""
    return math.floor(x + 0.5)


class Profile(str, Enum):
    """Named session size presets that pick the window/cadence parameters."""

    SMALL = "small"
    MEDIUM = "medium"


class UtteranceKind(str, Enum):
    HUMAN = "human"
    BOT = "bot"
    SYSTEM = "system"


class Strategy(IntEnum):
    """The seven conversational strategies; the value is the default rank.

    Lower rank wins arbitration when several strategies trigger at once.
    """

    DIRECT_CHATTING = 1
    INITIATIVE_SUMMARIZATION = 2
    PARTICIPATION_ENCOURAGEMENT = 3
    SUBTOPIC_TRANSITION = 4
    CONFLICT_RESOLUTION = 5
    IN_CONTEXT_CHIME_IN = 6
    KEEP_SILENT = 7

    @property
    def rank(self) -> int:
        return int(self)


class TopicStatus(str, Enum):
    """Discussion progress of one sub-topic. Transitions never move backwards."""

    NOT_DISCUSSED = "not discussed"
    BEING_DISCUSSED = "being discussed"
    WELL_DISCUSSED = "well discussed"

    @property
    def order(self) -> int:
        return _STATUS_ORDER[self]


_STATUS_ORDER = {
    TopicStatus.NOT_DISCUSSED: 0,
    TopicStatus.BEING_DISCUSSED: 1,
    TopicStatus.WELL_DISCUSSED: 2,
}


@dataclass(frozen=True)
class SubTopic:
    """One facet of the session topic, fixed for the whole session."""

    index: int
    title: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("sub-topic index must be >= 0")
        if not self.title.strip():
            raise ValueError("sub-topic title must be non-empty")


@dataclass(frozen=True)
class TopicInputs:
    """Organiser-supplied background: topic plus optional agenda/hints/roles."""

    topic: str
    agenda: tuple[str, ...] | None = None
    hints: str | None = None
    attendee_roles: str | None = None

    def __post_init__(self) -> None:
        if not self.topic.strip():
            raise InvalidConfigError("topic must be non-empty")
        if self.agenda is not None and not isinstance(self.agenda, tuple):
            object.__setattr__(self, "agenda", tuple(self.agenda))


@dataclass(frozen=True)
class Utterance:
    """One chat message. ``word_count`` always equals the whitespace-token count."""

    id: int
    sender: str
    kind: UtteranceKind
    text: str
    word_count: int
    timestamp: int

    def __post_init__(self) -> None:
        if self.word_count != count_words(self.text):
            raise ValueError(
                f"word_count {self.word_count} != token count {count_words(self.text)}"
            )

    @classmethod
    def make(
        cls, id: int, sender: str, kind: UtteranceKind, text: str, timestamp: int
    ) -> "Utterance":
        return cls(id, sender, kind, text, count_words(text), timestamp)


@dataclass(frozen=True)
class ArbitrationParams:
    """Thresholds and warm-up/cool-down turn counts for the strategy arbitrator.

    Warm-ups and cool-downs are counted in human utterances since session
    start; the defaults scale with the participant count, see
    :meth:`for_participants`.
    """

    warmup_summarization: int
    cooldown_summarization: int
    warmup_encouragement: int
    warmup_transition: int
    cooldown_transition: int
    warmup_conflict: int
    conflict_stall_window: int
    n_active_required: int
    encouragement_cooldown_increment: int = 2
    thre_freq_lt: float = 0.4
    thre_len_lt: float = 0.4
    thre_freq_st: float = 1.0
    thre_len_st: float = 5.0
    silence_alpha: float = 0.2
    semantic_beta: float = 0.4
    chime_threshold: float = 0.45

    def __post_init__(self) -> None:
        for name in (
            "warmup_summarization",
            "cooldown_summarization",
            "warmup_encouragement",
            "warmup_transition",
            "cooldown_transition",
            "warmup_conflict",
            "conflict_stall_window",
        ):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be >= 0")
        if self.n_active_required < 1:
            raise InvalidConfigError("n_active_required must be >= 1")
        if self.encouragement_cooldown_increment < 0:
            raise InvalidConfigError("encouragement_cooldown_increment must be >= 0")
        for name in ("thre_freq_lt", "thre_len_lt", "silence_alpha"):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be > 0")
        if not 0.0 <= self.semantic_beta <= 1.0:
            raise InvalidConfigError("semantic_beta must be in [0, 1]")
        if not 0.0 < self.chime_threshold < 1.0:
            raise InvalidConfigError("chime_threshold must be in (0, 1)")

    @classmethod
    def for_participants(cls, participant_count: int, **overrides) -> "ArbitrationParams":
        """Defaults scaled to ``participant_count`` (P): warm-ups 11P/3P/5P/9P,
        cool-downs 12P/7P, a 9P stall window, and ceil(P/2) active speakers
        required before a summary."""
        if participant_count < 2:
            raise InvalidConfigError("participant_count must be >= 2")
        p = participant_count
        values = dict(
            warmup_summarization=11 * p,
            cooldown_summarization=12 * p,
            warmup_encouragement=3 * p,
            warmup_transition=5 * p,
            cooldown_transition=7 * p,
            warmup_conflict=9 * p,
            conflict_stall_window=9 * p,
            n_active_required=math.ceil(p / 2),
        )
        values.update(overrides)
        return cls(**values)

    def replace(self, **changes) -> "ArbitrationParams":
        return replace(self, **changes)


_FIELD_NAMES: tuple[str, ...] = ()  # populated lazily in params_from_dict


def params_from_dict(
    participant_count: int, data: Mapping[str, object] | None
) -> ArbitrationParams:
    """Build params for P participants, applying overrides from a plain dict."""
    global _FIELD_NAMES
    if not _FIELD_NAMES:
        _FIELD_NAMES = tuple(f.name for f in fields(ArbitrationParams))
    overrides = {}
    for key, value in (data or {}).items():
        if key not in _FIELD_NAMES:
            raise InvalidConfigError(f"unknown arbitration parameter: {key}")
        overrides[key] = value
    return ArbitrationParams.for_participants(participant_count, **overrides)


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs up front; immutable once the chat starts."""

    topic: str
    participant_count: int
    n_exe: int
    n_sw: int
    n_lw: int
    arbitration: ArbitrationParams
    agenda: tuple[str, ...] | None = None
    hints: str | None = None
    attendee_roles: str | None = None
    bot_keyword: str = DEFAULT_BOT_KEYWORD
    subtopic_count: int = 3
    random_seed: int | None = None
    strategy_ranks: Mapping[str, int] | None = None

    def __post_init__(self) -> None:
        if not self.topic.strip():
            raise InvalidConfigError("topic must be non-empty")
        if self.participant_count < 2:
            raise InvalidConfigError("participant_count must be >= 2")
        if self.n_exe < 1:
            raise InvalidConfigError("n_exe must be >= 1")
        if self.n_sw < 1:
            raise InvalidConfigError("n_sw must be >= 1")
        if self.n_lw != 10 * self.n_sw:
            raise InvalidConfigError("n_lw must equal 10 * n_sw")
        if not self.bot_keyword.strip():
            raise InvalidConfigError("bot_keyword must be non-empty")
        if not 2 <= self.subtopic_count <= 6:
            raise InvalidConfigError("subtopic_count must be between 2 and 6")
        if self.agenda is not None and not isinstance(self.agenda, tuple):
            object.__setattr__(self, "agenda", tuple(self.agenda))

    @property
    def topic_inputs(self) -> TopicInputs:
        return TopicInputs(self.topic, self.agenda, self.hints, self.attendee_roles)

    @property
    def bot_name(self) -> str:
        """Display identity of the bot: the keyword without its @-prefix."""
        return self.bot_keyword.lstrip("@") or self.bot_keyword


def derive_config(
    participant_count: int,
    profile: Profile | str,
    inputs: TopicInputs,
    *,
    bot_keyword: str = DEFAULT_BOT_KEYWORD,
    subtopic_count: int = 3,
    random_seed: int | None = None,
    arbitration_overrides: Mapping[str, object] | None = None,
    strategy_ranks: Mapping[str, int] | None = None,
) -> SessionConfig:
    """Derive a full session config from the participant count and a profile.

    small  -> n_sw = 8,  n_exe = 3
    medium -> n_sw = 2P, n_exe = round_half_up(0.75 * P)
    and always n_lw = 10 * n_sw.
    """
    profile = Profile(profile)
    if participant_count < 2:
        raise InvalidConfigError("participant_count must be >= 2")
    if profile is Profile.SMALL:
        n_sw, n_exe = 8, 3
    else:
        n_sw = 2 * participant_count
        n_exe = round_half_up(0.75 * participant_count)
    return SessionConfig(
        topic=inputs.topic,
        participant_count=participant_count,
        n_exe=n_exe,
        n_sw=n_sw,
        n_lw=10 * n_sw,
        arbitration=params_from_dict(participant_count, arbitration_overrides),
        agenda=inputs.agenda,
        hints=inputs.hints,
        attendee_roles=inputs.attendee_roles,
        bot_keyword=bot_keyword,
        subtopic_count=subtopic_count,
        random_seed=random_seed,
        strategy_ranks=dict(strategy_ranks) if strategy_ranks else None,
    )


def window(transcript: Sequence[Utterance], n: int) -> list[Utterance]:
    """The last ``n`` utterances of ``transcript`` (all of it when shorter)."""
    if n < 1:
        raise ValueError("window size must be >= 1")
    return list(transcript[-n:])


def human_only(utterances: Iterable[Utterance]) -> list[Utterance]:
    return [u for u in utterances if u.kind is UtteranceKind.HUMAN]
