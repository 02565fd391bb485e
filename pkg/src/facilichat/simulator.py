"""Multi-user chat simulator for exercising the facilitation pipeline.

Virtual users are profiled once from example chat snippets (speaking roles,
wording traits, a log-normal message-length model), then take turns: pick the
next speaker, pick a role and a trait, sample a word budget, write the
message. Role picks that would repeat an annoying behaviour too soon are
blocked by per-user cool-downs. With a scripted provider and a fixed seed a
run is fully deterministic, down to the bytes of the session log.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    SessionConfig,
    Utterance,
    count_words,
    round_half_up,
    window,
)
from .llm import LLMGateway, Provider, extract_answer, parse_lines
from .persistence import SessionLog
from .pipeline import SessionPipeline, counter_clock
from .prompts import (
    MUS_ROLE_PICK,
    MUS_ROLES,
    MUS_SPEAKER,
    MUS_TRAIT_PICK,
    MUS_TRAITS,
    MUS_UTTERANCE,
    render_context,
    render_window,
)

log = logging.getLogger(__name__)

SPEAKING_ROLES: tuple[str, ...] = (
    "questioner",
    "proposer",
    "supporter",
    "skeptic",
    "summarizer",
    "decision-pusher",
    "detail-asker",
    "off-topic drifter",
    "agree-er",
    "disagree-er",
    "direct-chatter",
)

UTTERANCE_TRAITS: tuple[str, ...] = (
    "laconic",
    "verbose",
    "formal",
    "casual",
    "hedging",
    "assertive",
    "humorous",
    "polite",
    "blunt",
    "inquisitive",
)

ROLE_SUBSET_SIZE = 6

# roles that get a cool-down so one user does not spam the same move
ROLE_BEHAVIORS: dict[str, str] = {
    "questioner": "asking_questions",
    "detail-asker": "asking_questions",
    "direct-chatter": "direct_chatting",
    "off-topic drifter": "topic_transition",
}


class LengthParamError(ValueError):
    """Length statistics that cannot parameterise the sampler."""


def length_params(
    l_min: int,
    l_avg: int,
    l_max: int,
    *,
    mix_weight: float = 0.3,
    sigma_scale: float = 0.67,
) -> tuple[float, float]:
    """Log-normal (mu, sigma) from min/average/max observed message lengths.

    mu anchors the distribution between the shortest and the typical message
    (mix_weight on the min side); sigma scales with the log-distance from
    there to the longest message. Degenerate stats (all equal) give sigma 0.
    """
    if not (0 < l_min <= l_avg <= l_max):
        raise LengthParamError(
            f"need 0 < l_min <= l_avg <= l_max, got ({l_min}, {l_avg}, {l_max})"
        )
    mu = math.log(mix_weight * l_min + (1.0 - mix_weight) * l_avg)
    sigma = sigma_scale * (math.log(l_max) - mu)
    if sigma < 0:
        raise LengthParamError("l_max below the mu anchor; check the inputs")
    return mu, sigma


@dataclass(frozen=True)
class LengthModel:
    l_min: int
    l_avg: int
    l_max: int

    @property
    def mu(self) -> float:
        return length_params(self.l_min, self.l_avg, self.l_max)[0]

    @property
    def sigma(self) -> float:
        return length_params(self.l_min, self.l_avg, self.l_max)[1]

    def to_dict(self) -> dict:
        return {"l_min": self.l_min, "l_avg": self.l_avg, "l_max": self.l_max}


def sample_length(
    model: LengthModel,
    rng: np.random.Generator,
    *,
    mode: str = "reject",
) -> int:
    """One integer word budget in [l_min, l_max].

    "reject" redraws until the rounded draw lands inside the bounds; "clip"
    rounds one draw and clamps it. A zero-sigma model always returns its
    single possible value.
    """
    if mode not in ("reject", "clip"):
        raise ValueError(f"unknown length sampling mode: {mode!r}")
    mu, sigma = model.mu, model.sigma
    if sigma == 0.0:
        return min(max(round(math.exp(mu)), model.l_min), model.l_max)
    if mode == "clip":
        return min(max(round(rng.lognormal(mu, sigma)), model.l_min), model.l_max)
    for _ in range(100_000):
        value = round(rng.lognormal(mu, sigma))
        if model.l_min <= value <= model.l_max:
            return int(value)
    raise RuntimeError("length sampler failed to land in bounds; parameters degenerate")


@dataclass(frozen=True)
class VirtualUserProfile:
    name: str
    roles: tuple[str, ...]
    traits: tuple[str, ...]
    length: LengthModel

    def __post_init__(self) -> None:
        unknown_roles = set(self.roles) - set(SPEAKING_ROLES)
        if unknown_roles:
            raise ValueError(f"unknown roles: {sorted(unknown_roles)}")
        unknown_traits = set(self.traits) - set(UTTERANCE_TRAITS)
        if unknown_traits:
            raise ValueError(f"unknown traits: {sorted(unknown_traits)}")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("duplicate roles in profile")
        if len(set(self.traits)) != len(self.traits):
            raise ValueError("duplicate traits in profile")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "roles": list(self.roles),
            "traits": list(self.traits),
            "length": self.length.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "VirtualUserProfile":
        length = data["length"]
        return cls(
            name=data["name"],
            roles=tuple(data["roles"]),
            traits=tuple(data["traits"]),
            length=LengthModel(length["l_min"], length["l_avg"], length["l_max"]),
        )


@dataclass(frozen=True)
class ChatSnippet:
    """An example conversation: (speaker, text) turns, 10 to 30 of them."""

    turns: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not 10 <= len(self.turns) <= 30:
            raise ValueError(f"snippet must have 10..30 turns, got {len(self.turns)}")

    def render(self) -> str:
        return "\n".join(f"{speaker}: {text}" for speaker, text in self.turns)


@dataclass(frozen=True)
class SimulatorConfig:
    """Knobs of the simulator itself (the session has its own config)."""

    context_turns: int = 16
    behavior_cooldown: int = 3
    length_mode: str = "reject"
    questioner_length_factor: float = 1.0
    boost_min: float = 1.0
    boost_avg: float = 1.0
    boost_max: float = 1.0


def _length_stats(
    snippets: Sequence[ChatSnippet], cfg: SimulatorConfig
) -> LengthModel:
    lengths = [
        count_words(text) for snippet in snippets for _, text in snippet.turns if text.strip()
    ]
    if not lengths:
        raise LengthParamError("snippets contain no text")
    l_min = max(1, round_half_up(min(lengths) * cfg.boost_min))
    l_max = max(1, round_half_up(max(lengths) * cfg.boost_max))
    l_avg = max(1, round_half_up((sum(lengths) / len(lengths)) * cfg.boost_avg))
    l_avg = min(max(l_avg, l_min), l_max)
    if l_min > l_max:
        raise LengthParamError("boost factors inverted the length bounds")
    return LengthModel(l_min, l_avg, l_max)


def model_user_behavior(
    snippets: Sequence[ChatSnippet],
    names: Sequence[str],
    gateway: LLMGateway,
    rng: np.random.Generator,
    *,
    config: SimulatorConfig | None = None,
) -> list[VirtualUserProfile]:
    """Build one profile per name from the example snippets.

    Each user gets ROLE_SUBSET_SIZE roles and traits picked by the provider
    (with a re-prompt, then a uniform random fallback, on invalid picks) and
    the shared length model measured over all snippet turns.
    """
    if not 1 <= len(snippets) <= 5:
        raise ValueError("need 1 to 5 example snippets")
    if not names:
        raise ValueError("need at least one user name")
    cfg = config or SimulatorConfig()
    length = _length_stats(snippets, cfg)
    rendered = "\n---\n".join(s.render() for s in snippets)
    profiles = []
    for name in names:
        subsets: dict[str, tuple[str, ...]] = {}
        for what, template, catalogue in (
            ("roles", MUS_ROLES, SPEAKING_ROLES),
            ("traits", MUS_TRAITS, UTTERANCE_TRAITS),
        ):
            bindings = {
                "snippets": rendered,
                "catalogue": "\n".join(catalogue),
                "count": str(ROLE_SUBSET_SIZE),
                "name": name,
            }
            subset: tuple[str, ...] | None = None
            for _ in range(2):  # one re-prompt before the random fallback
                completion = gateway.generate(template, bindings)
                lines = [line.lower() for line in parse_lines(extract_answer(completion))]
                valid = [item for item in catalogue if item in lines]
                if len(lines) == ROLE_SUBSET_SIZE and len(valid) == ROLE_SUBSET_SIZE:
                    subset = tuple(valid)
                    break
            if subset is None:
                log.warning("provider never produced a valid %s subset for %s", what, name)
                picked = rng.choice(len(catalogue), size=ROLE_SUBSET_SIZE, replace=False)
                subset = tuple(catalogue[i] for i in sorted(picked))
            subsets[what] = subset
        profiles.append(
            VirtualUserProfile(name, subsets["roles"], subsets["traits"], length)
        )
    return profiles


class RoleCooldowns:
    """Per-(user, behaviour) turn counters blocking repeats of annoying moves."""

    def __init__(self, cooldown: int = 3):
        self.cooldown = cooldown
        self._remaining: dict[tuple[str, str], int] = {}

    def tick(self) -> None:
        for key in list(self._remaining):
            if self._remaining[key] > 0:
                self._remaining[key] -= 1

    def available(self, user: str, roles: Sequence[str]) -> list[str]:
        result = []
        for role in roles:
            behaviour = ROLE_BEHAVIORS.get(role)
            if behaviour is None or self._remaining.get((user, behaviour), 0) == 0:
                result.append(role)
        return result

    def trigger(self, user: str, role: str) -> None:
        behaviour = ROLE_BEHAVIORS.get(role)
        if behaviour is not None:
            self._remaining[(user, behaviour)] = self.cooldown


def select_next_speaker(
    context: Sequence[Utterance],
    profiles: Sequence[VirtualUserProfile],
    gateway: LLMGateway,
    rng: np.random.Generator,
    *,
    topic: str,
    bot_name: str,
    cooldowns: RoleCooldowns,
) -> tuple[VirtualUserProfile, str]:
    """Next (speaker, role): provider proposals with a random safety net.

    An invalid speaker proposal (the last speaker, the bot, or an unknown
    name) falls back to a uniform pick among the other users with a random
    role; an invalid or cooling-down role proposal is re-rolled among that
    user's currently available roles.
    """
    last_speaker = context[-1].sender if context else "(nobody)"
    by_name = {p.name: p for p in profiles}
    profile_lines = "\n".join(f"{p.name}: {', '.join(p.roles)}" for p in profiles)
    window_text = render_window(list(context))
    completion = gateway.generate(
        MUS_SPEAKER,
        {
            "topic": topic,
            "profiles": profile_lines,
            "window": window_text,
            "last_speaker": last_speaker,
            "bot_name": bot_name,
        },
    )
    answer = extract_answer(completion)
    proposed = answer.splitlines()[0].strip() if answer.strip() else ""
    profile = by_name.get(proposed)
    if profile is None or proposed == last_speaker or proposed == bot_name:
        candidates = [p for p in profiles if p.name != last_speaker]
        if not candidates:
            candidates = list(profiles)
        profile = candidates[int(rng.integers(len(candidates)))]
        role_pool = cooldowns.available(profile.name, profile.roles) or list(profile.roles)
        role = role_pool[int(rng.integers(len(role_pool)))]
        return profile, role

    available = cooldowns.available(profile.name, profile.roles)
    if not available:
        available = list(profile.roles)
    completion = gateway.generate(
        MUS_ROLE_PICK,
        {
            "topic": topic,
            "window": window_text,
            "name": profile.name,
            "roles": "\n".join(available),
        },
    )
    answer = extract_answer(completion)
    proposed_role = answer.splitlines()[0].strip().lower() if answer.strip() else ""
    if proposed_role in available:
        return profile, proposed_role
    role = available[int(rng.integers(len(available)))]
    return profile, role


def generate_utterance(
    profile: VirtualUserProfile,
    role: str,
    word_budget: int,
    gateway: LLMGateway,
    rng: np.random.Generator,
    *,
    topic: str,
    context_text: str,
    summary: str,
    window_text: str,
) -> str | None:
    """Trait pick plus the message itself; None when the turn must be skipped."""
    completion = gateway.generate(
        MUS_TRAIT_PICK,
        {
            "window": window_text,
            "name": profile.name,
            "role": role,
            "traits": "\n".join(profile.traits),
        },
    )
    answer = extract_answer(completion)
    trait = answer.splitlines()[0].strip().lower() if answer.strip() else ""
    if trait not in profile.traits:
        trait = profile.traits[int(rng.integers(len(profile.traits)))]
    bindings = {
        "topic": topic,
        "context": context_text,
        "summary": summary or "(just getting started)",
        "window": window_text,
        "name": profile.name,
        "role": role,
        "trait": trait,
        "length": str(word_budget),
    }
    for _ in range(2):  # one retry on an empty completion
        text = extract_answer(gateway.generate(MUS_UTTERANCE, bindings)).strip()
        if text:
            return text
    log.warning("empty utterance for %s twice, skipping the turn", profile.name)
    return None


@dataclass
class SimulationResult:
    pipeline: SessionPipeline
    profiles: list[VirtualUserProfile]
    turns_taken: int
    turns_skipped: int

    @property
    def transcript(self) -> list[Utterance]:
        return self.pipeline.transcript


def run_simulation(
    config: SessionConfig,
    profiles: Sequence[VirtualUserProfile],
    turns: int,
    seed: int,
    provider: Provider,
    *,
    log_path: str | None = None,
    sim_config: SimulatorConfig | None = None,
) -> SimulationResult:
    """Drive a full simulated session for ``turns`` human turns.

    Determinism: the clock is a counter, the RNG is seeded, and with a
    scripted provider the resulting session log is byte-stable.
    """
    if turns < 1:
        raise ValueError("turns must be >= 1")
    if len(profiles) != config.participant_count:
        raise ValueError(
            f"{len(profiles)} profiles for {config.participant_count} participants"
        )
    cfg = sim_config or SimulatorConfig()
    rng = np.random.default_rng(seed)
    session_log = SessionLog(log_path) if log_path else None
    gateway = LLMGateway(
        provider,
        record_hook=(session_log.append_llm if session_log else None),
        sleep=lambda _s: None,  # scripted providers never need real backoff
    )
    pipeline = SessionPipeline(
        config, gateway, clock=counter_clock(), session_log=session_log
    )
    for profile in profiles:
        pipeline.register_participant(profile.name)
    pipeline.initialize()
    if session_log is not None:
        session_log.append_profiles([p.to_dict() for p in profiles])
    cooldowns = RoleCooldowns(cfg.behavior_cooldown)
    context_text = render_context(config.topic_inputs)
    taken = skipped = 0
    for _ in range(turns):
        context = window(pipeline.transcript, cfg.context_turns) if pipeline.transcript else []
        profile, role = select_next_speaker(
            context,
            profiles,
            gateway,
            rng,
            topic=config.topic,
            bot_name=config.bot_name,
            cooldowns=cooldowns,
        )
        budget = sample_length(profile.length, rng, mode=cfg.length_mode)
        if role == "questioner" and cfg.questioner_length_factor != 1.0:
            budget = max(1, round_half_up(budget * cfg.questioner_length_factor))
        summary = (
            pipeline.state.render_summaries() if pipeline.state is not None else ""
        )
        text = generate_utterance(
            profile,
            role,
            budget,
            gateway,
            rng,
            topic=config.topic,
            context_text=context_text,
            summary=summary,
            window_text=render_window(list(context)),
        )
        cooldowns.tick()
        if text is None:
            skipped += 1
            continue
        cooldowns.trigger(profile.name, role)
        taken += 1
        result = pipeline.add_human(profile.name, text)
        if result.is_ping:
            pipeline.run_cycle_and_commit(result.utterance)
        elif result.cycle_due:
            pipeline.run_cycle_and_commit()
    if session_log is not None:
        session_log.close()
    return SimulationResult(pipeline, list(profiles), taken, skipped)


DEFAULT_SNIPPETS: tuple[ChatSnippet, ...] = (
    ChatSnippet(
        turns=(
            ("Ana", "Hey all, did everyone get a chance to look at the draft schedule?"),
            ("Ben", "I did. The Tuesday slot clashes with the standup."),
            ("Ana", "Good catch. We could move it to Wednesday morning."),
            ("Caro", "Wednesday works for me."),
            ("Ben", "Same, as long as it stays before noon."),
            ("Dee", "Can we keep it to thirty minutes though? Last time it ran long."),
            ("Ana", "Agreed, thirty minutes with a hard stop."),
            ("Caro", "Who is writing the agenda?"),
            ("Ben", "I can take that this week."),
            ("Dee", "Thanks Ben. Send it the day before please."),
            ("Ana", "Settled then: Wednesday, thirty minutes, agenda from Ben."),
        ),
    ),
    ChatSnippet(
        turns=(
            ("Eli", "The venue options are the cafe or the library room."),
            ("Fay", "Library is free, the cafe is not."),
            ("Gus", "But the cafe has better coffee, obviously."),
            ("Eli", "We have a budget of exactly zero, so."),
            ("Fay", "Library it is?"),
            ("Gus", "Fine, library. I will bring a thermos."),
            ("Hana", "Do we need to book it in advance?"),
            ("Eli", "Yes, two days ahead. I can do that today."),
            ("Hana", "Great. How many seats do we need?"),
            ("Fay", "Ten should be plenty."),
            ("Eli", "Booking for ten, done."),
            ("Gus", "Nice. Same time as usual?"),
            ("Fay", "Same time."),
        ),
    ),
    ChatSnippet(
        turns=(
            ("Ivo", "Quick one: are we shipping the beta this Friday or not?"),
            ("Jia", "Only if the login bug is fixed."),
            ("Kay", "I pushed a fix this morning, it is in review."),
            ("Ivo", "Who can review it today?"),
            ("Jia", "I will, right after lunch."),
            ("Kay", "Thanks. The rest of the release notes are drafted."),
            ("Lou", "Did anyone test the upgrade path from 1.2?"),
            ("Kay", "Not yet, that is the risky part."),
            ("Lou", "I can run it tomorrow morning."),
            ("Ivo", "So: review today, upgrade test tomorrow, decide Thursday."),
            ("Jia", "Works for me."),
            ("Lou", "Same."),
        ),
    ),
)


def default_names(count: int) -> list[str]:
    base = ["Ava", "Bruno", "Chen", "Dana", "Egon", "Fern", "Gil", "Hope",
            "Iris", "Jan", "Kim", "Luca"]
    if count <= len(base):
        return base[:count]
    return base + [f"User{i}" for i in range(len(base) + 1, count + 1)]
