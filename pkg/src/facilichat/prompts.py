"""Prompt templates for the facilitation pipeline and the user simulator.

Reasoning-style templates instruct the model to think first and put the
machine-readable part after a final ANSWER: line; the parsers in llm.py read
only what follows the last marker.
"""

from __future__ import annotations

from .core import SubTopic, TopicInputs, Utterance

from .llm import PromptTemplate

NO_FABRICATION = (
    "Only rely on the background and the messages above. If the request needs "
    "information that is not there, say it is outside what you know instead of "
    "making something up."
)

SUBTOPIC_SEED = PromptTemplate(
    name="subtopic_seed",
    body=(
        "You prepare a group chat on the following topic.\n"
        "Topic: {topic}\n"
        "Extra notes from the organiser: {hints}\n"
        "Who will attend: {attendee_roles}\n"
        "Break the topic into exactly {count} concrete sub-topics the group "
        "should settle, each a short noun phrase. Reply with that many lines, "
        "one sub-topic per line, numbered."
    ),
    required_slots=("topic", "hints", "attendee_roles", "count"),
)

TOPIC_SUMMARIES = PromptTemplate(
    name="topic_summaries",
    body=(
        "You follow a group chat about: {topic}\n"
        "Background: {context}\n"
        "Sub-topics:\n{subtopics}\n"
        "Your previous one-line summaries of each sub-topic:\n{prev_summaries}\n"
        "Newest messages:\n{window}\n"
        "Update each summary so it covers the discussion so far, including these "
        "newest messages. Think about what actually changed first, then finish "
        "with a line reading ANSWER: followed by exactly one summary line per "
        "sub-topic, numbered to match the list above. Keep a previous summary "
        "verbatim when nothing new was said about it."
    ),
    required_slots=("topic", "context", "subtopics", "prev_summaries", "window"),
)

SUBTOPIC_STATUS = PromptTemplate(
    name="subtopic_status",
    body=(
        "You track how far a group chat has progressed on each sub-topic.\n"
        "Sub-topics with their current status:\n{prev_status}\n"
        "Fresh summaries of what has been said per sub-topic:\n{summaries}\n"
        "Newest messages:\n{window}\n"
        "Statuses are exactly one of: not discussed, being discussed, well "
        "discussed. Treat a sub-topic as well discussed only once most "
        "participants have converged and nobody keeps objecting; a status never "
        "moves backwards. Reason step by step about each sub-topic, then finish "
        "with a line reading ANSWER: followed by one line per sub-topic in the "
        "form '<number>: <status>'."
    ),
    required_slots=("prev_status", "summaries", "window"),
)

DISCUSSED_SUBTOPICS = PromptTemplate(
    name="discussed_subtopics",
    body=(
        "Sub-topics of the chat:\n{subtopics}\n"
        "Newest messages:\n{window}\n"
        "Which of the sub-topics are the participants talking about in these "
        "messages? Think it through, then finish with a line reading ANSWER: "
        "followed by the matching sub-topic titles copied exactly, one per line. "
        "Leave the answer empty when none of them is being discussed."
    ),
    required_slots=("subtopics", "window"),
)

SUMMARY_MERGE = PromptTemplate(
    name="summary_merge",
    body=(
        "You keep one running note per participant and sub-topic of a group chat.\n"
        "Participant: {participant}\n"
        "Sub-topic: {subtopic}\n"
        "Note so far: {prev_summary}\n"
        "Newest messages:\n{window}\n"
        "Fold what this participant just said about this sub-topic into the "
        "note: their stance, proposals, and preferences, in at most two "
        "sentences. Finish with a line reading ANSWER: followed by the updated "
        "note. If they said nothing relevant, answer with the note unchanged."
    ),
    required_slots=("participant", "subtopic", "prev_summary", "window"),
)

CHIME_CLASSIFIER = PromptTemplate(
    name="chime_classifier",
    body=(
        "Newest messages of a group chat:\n{window}\n"
        "Answer two yes/no questions about them. First: is the conversation "
        "stuck, circling or unable to move forward? Second: is there an open "
        "question or missing fact that an assistant could settle (questions the "
        "participants ask each other do not count)? Reason briefly, then finish "
        "with a line reading ANSWER: stuck=<0 or 1> unsolve=<0 or 1>."
    ),
    required_slots=("window",),
)

DIRECT_CHAT = PromptTemplate(
    name="direct_chat",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\nBackground: {context}\n"
        "Recent messages:\n{window}\n"
        "{sender} addressed you directly: {request}\n"
        "Reply to them helpfully and briefly. " + NO_FABRICATION + "\n"
        "Finish with a line reading ANSWER: followed by your reply."
    ),
    required_slots=("bot_name", "topic", "context", "window", "sender", "request"),
)

CHIME_IN = PromptTemplate(
    name="chime_in",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\nBackground: {context}\n"
        "Recent messages:\n{window}\n"
        "The discussion looks stalled or has an open question nobody can settle. "
        "Without being asked, contribute one short message that unblocks it: "
        "settle the open point or suggest a concrete way forward. "
        + NO_FABRICATION + "\n"
        "Finish with a line reading ANSWER: followed by your message."
    ),
    required_slots=("bot_name", "topic", "context", "window"),
)

TAKE_HOME_SUMMARY = PromptTemplate(
    name="take_home_summary",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\n"
        "Sub-topics with status:\n{statuses}\n"
        "Per-participant notes:\n{cells}\n"
        "Recent messages:\n{window}\n"
        "Post a take-home summary for the group: per sub-topic, what has been "
        "agreed and what is still open, in a few short lines. Finish with a line "
        "reading ANSWER: followed by the summary."
    ),
    required_slots=("bot_name", "topic", "statuses", "cells", "window"),
)

ENCOURAGEMENT = PromptTemplate(
    name="encouragement",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\n"
        "Recent messages:\n{window}\n"
        "What {target} has said so far: {target_summary}\n"
        "They have gone quiet. Invite them back in with one friendly, specific "
        "question tied to the current discussion; mention them by name. Finish "
        "with a line reading ANSWER: followed by your message."
    ),
    required_slots=("bot_name", "topic", "window", "target", "target_summary"),
)

TRANSITION = PromptTemplate(
    name="transition",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\n"
        "Sub-topics with status:\n{statuses}\n"
        "Recent messages:\n{window}\n"
        "Guidance: {mode}\n"
        "Write one short message steering the group accordingly. Finish with a "
        "line reading ANSWER: followed by your message."
    ),
    required_slots=("bot_name", "topic", "statuses", "window", "mode"),
)

TRANSITION_ASK_INTEREST = (
    "Few people have engaged with the current sub-topic yet. Ask the group "
    "whether they want to keep discussing it or rather move on, naming it."
)
TRANSITION_PROPOSE_NEXT = (
    "The current sub-topic has had broad input and attention is fading. "
    "Propose moving on to the next undiscussed sub-topic, naming it."
)

CONFLICT = PromptTemplate(
    name="conflict",
    body=(
        "You are {bot_name}, the facilitation assistant in a group chat about: "
        "{topic}\n"
        "Sub-topics with status:\n{statuses}\n"
        "Where each participant stands:\n{cells}\n"
        "Recent messages:\n{window}\n"
        "The group has stopped converging: no sub-topic has been settled for a "
        "long stretch. Name the disagreement neutrally, restate the main "
        "positions, and propose a concrete compromise or a way to decide. "
        "Finish with a line reading ANSWER: followed by your message."
    ),
    required_slots=("bot_name", "topic", "statuses", "cells", "window"),
)

# --- user-simulator templates -----------------------------------------------

MUS_ROLES = PromptTemplate(
    name="mus_roles",
    body=(
        "Example group chats:\n{snippets}\n"
        "Possible speaking roles a chat participant can take:\n{catalogue}\n"
        "Pick the {count} roles, drawn only from that list, that together make "
        "a believable participant called {name} in chats like the examples. "
        "Think about it, then finish with a line reading ANSWER: followed by "
        "the chosen roles, one per line, copied exactly."
    ),
    required_slots=("snippets", "catalogue", "count", "name"),
)

MUS_TRAITS = PromptTemplate(
    name="mus_traits",
    body=(
        "Example group chats:\n{snippets}\n"
        "Possible wording traits a chat participant can show:\n{catalogue}\n"
        "Pick the {count} traits, drawn only from that list, that fit how "
        "{name} would write in chats like the examples. Think about it, then "
        "finish with a line reading ANSWER: followed by the chosen traits, one "
        "per line, copied exactly."
    ),
    required_slots=("snippets", "catalogue", "count", "name"),
)

MUS_SPEAKER = PromptTemplate(
    name="mus_speaker",
    body=(
        "A group chat about: {topic}\n"
        "Participants and their usual roles:\n{profiles}\n"
        "Recent messages:\n{window}\n"
        "Who would naturally speak next? It must not be {last_speaker}, and the "
        "assistant {bot_name} never takes a turn here. Reason about the flow, "
        "then finish with a line reading ANSWER: followed by just that name."
    ),
    required_slots=("topic", "profiles", "window", "last_speaker", "bot_name"),
)

MUS_ROLE_PICK = PromptTemplate(
    name="mus_role_pick",
    body=(
        "A group chat about: {topic}\n"
        "Recent messages:\n{window}\n"
        "{name} speaks next. Their possible speaking roles:\n{roles}\n"
        "Which single role from that list fits this moment best? Reason about "
        "it, then finish with a line reading ANSWER: followed by just that role."
    ),
    required_slots=("topic", "window", "name", "roles"),
)

MUS_TRAIT_PICK = PromptTemplate(
    name="mus_trait_pick",
    body=(
        "Recent messages of a group chat:\n{window}\n"
        "{name} speaks next as: {role}. Their possible wording traits:\n{traits}\n"
        "Which single trait from that list fits this moment best? Finish with a "
        "line reading ANSWER: followed by just that trait."
    ),
    required_slots=("window", "name", "role", "traits"),
)

MUS_UTTERANCE = PromptTemplate(
    name="mus_utterance",
    body=(
        "A group chat about: {topic}\n"
        "Background: {context}\n"
        "Summary of the discussion so far: {summary}\n"
        "Recent messages:\n{window}\n"
        "Write the next message as {name}, acting as {role}, wording it {trait}, "
        "using about {length} words. Stay in character and react to the recent "
        "messages. Finish with a line reading ANSWER: followed by the message "
        "text only."
    ),
    required_slots=("topic", "context", "summary", "window", "name", "role", "trait", "length"),
)


# --- rendering helpers -------------------------------------------------------

def render_window(utterances: list[Utterance]) -> str:
    if not utterances:
        return "(no messages yet)"
    return "\n".join(f"{u.sender}: {u.text}" for u in utterances)


def render_subtopics(subtopics: list[SubTopic]) -> str:
    return "\n".join(f"{t.index + 1}. {t.title}" for t in subtopics)


def render_context(inputs: TopicInputs) -> str:
    parts = []
    if inputs.hints:
        parts.append(f"notes: {inputs.hints}")
    if inputs.attendee_roles:
        parts.append(f"attendees: {inputs.attendee_roles}")
    return "; ".join(parts) if parts else "(none)"
