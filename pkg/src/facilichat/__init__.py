"""facilichat: an LLM-driven facilitator for multi-user group chats.

The package bundles the facilitation pipeline (sub-topic tracking, dialog
analysis, a seven-strategy arbitrator), a WebSocket chat server, a multi-user
simulator for offline testing, and metrics over persisted session logs.
"""

from .core import (
    ArbitrationParams,
    InvalidConfigError,
    Profile,
    SessionConfig,
    Strategy,
    SubTopic,
    TopicInputs,
    TopicStatus,
    Utterance,
    UtteranceKind,
    count_words,
    derive_config,
    window,
)
from .llm import (
    LLMGateway,
    OpenAICompatProvider,
    ParseError,
    PromptRenderError,
    PromptTemplate,
    ProviderUnavailableError,
    ScriptedProvider,
    ScriptMismatchError,
    render,
)
from .pipeline import SessionPipeline, counter_clock, replay_session
from .simulator import (
    ChatSnippet,
    LengthModel,
    SimulatorConfig,
    VirtualUserProfile,
    model_user_behavior,
    run_simulation,
    sample_length,
)

__version__ = "0.1.0"

__all__ = [
    "ArbitrationParams",
    "ChatSnippet",
    "InvalidConfigError",
    "LLMGateway",
    "LengthModel",
    "OpenAICompatProvider",
    "ParseError",
    "Profile",
    "PromptRenderError",
    "PromptTemplate",
    "ProviderUnavailableError",
    "ScriptMismatchError",
    "ScriptedProvider",
    "SessionConfig",
    "SessionPipeline",
    "SimulatorConfig",
    "Strategy",
    "SubTopic",
    "TopicInputs",
    "TopicStatus",
    "Utterance",
    "UtteranceKind",
    "VirtualUserProfile",
    "count_words",
    "counter_clock",
    "derive_config",
    "model_user_behavior",
    "render",
    "replay_session",
    "run_simulation",
    "sample_length",
    "window",
]
