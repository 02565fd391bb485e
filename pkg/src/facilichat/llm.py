"""Provider abstraction: prompt templates, completion transport, parsing.

Three providers are supported: a scripted one for tests and replays, an
OpenAI-compatible HTTP endpoint for live runs, and anything else exposing
``complete(request) -> str``. The gateway wraps a provider with retry,
latency measurement, and verbatim request/response recording; responses are
recorded before any parsing happens.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .core import SubTopic, TopicStatus

log = logging.getLogger(__name__)

ANSWER_MARKER = "ANSWER:"


class PromptRenderError(ValueError):
    """A required template slot was left unbound."""


class ParseError(ValueError):
    """A completion did not match the expected structure."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ScriptMismatchError(RuntimeError):
    """A scripted provider in strict mode got a request it has no line for."""


class TransientProviderError(RuntimeError):
    """Retryable transport failure (timeouts, 5xx, rate limits)."""


class ProviderUnavailableError(RuntimeError):
    """The provider kept failing after all retries."""


_SLOT_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt body with ``{slot}`` placeholders."""

    name: str
    body: str
    required_slots: tuple[str, ...]

    def __post_init__(self) -> None:
        present = Counter(m.group(1) for m in _SLOT_RE.finditer(self.body))
        for slot in self.required_slots:
            if present[slot] != 1:
                raise ValueError(
                    f"template {self.name!r}: slot {{{slot}}} must appear exactly once"
                )


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every slot in the template body.

    Unknown bindings are ignored; an unbound slot raises PromptRenderError
    naming the slot.
    """
    def substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in bindings:
            raise PromptRenderError(
                f"template {template.name!r}: missing binding for slot {{{name}}}"
            )
        return str(bindings[name])

    return _SLOT_RE.sub(substitute, template.body)


@dataclass(frozen=True)
class ProviderRequest:
    prompt: str
    template_name: str = ""
    max_output_hint: int | None = None


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    latency_ms: float
    provider_id: str


class Provider(Protocol):
    provider_id: str

    def complete(self, request: ProviderRequest) -> str: ...


class ScriptedProvider:
    """Deterministic provider that replays canned completions.

    Resolution order per request: the global ``queue`` first (consumed FIFO
    across all templates), then ``script[template_name]``. A script entry may
    be a single string (repeats forever), a list (consumed in order; the last
    item repeats once exhausted unless strict), or a callable taking the
    per-template call index. In strict mode any unmatched or exhausted
    request raises ScriptMismatchError instead of improvising.
    """

    def __init__(
        self,
        script: Mapping[str, object] | None = None,
        queue: Iterable[str] | None = None,
        *,
        strict: bool = False,
        provider_id: str = "scripted",
    ):
        self._script = dict(script or {})
        self._queue = deque(queue or [])
        self._counts: Counter[str] = Counter()
        self._lock = threading.Lock()
        self.strict = strict
        self.provider_id = provider_id

    def complete(self, request: ProviderRequest) -> str:
        with self._lock:
            index = self._counts[request.template_name]
            self._counts[request.template_name] += 1
            if self._queue:
                return str(self._queue.popleft())
            entry = self._script.get(request.template_name)
            if entry is None:
                if self.strict:
                    raise ScriptMismatchError(
                        f"no scripted completion for template {request.template_name!r}"
                    )
                return ""
            if callable(entry):
                return str(entry(index))
            if isinstance(entry, str):
                return entry
            items = list(entry)
            if index < len(items):
                return str(items[index])
            if self.strict or not items:
                raise ScriptMismatchError(
                    f"script for {request.template_name!r} exhausted after {len(items)} calls"
                )
            return str(items[-1])

    def calls_for(self, template_name: str) -> int:
        with self._lock:
            return self._counts[template_name]

    @property
    def total_calls(self) -> int:
        with self._lock:
            return sum(self._counts.values())


class OpenAICompatProvider:
    """Chat-completions client for any OpenAI-compatible HTTP endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        *,
        timeout: float = 60.0,
        temperature: float = 0.7,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key or os.environ.get("FACILICHAT_API_KEY") or os.environ.get(
            "OPENAI_API_KEY"
        )
        self.timeout = timeout
        self.temperature = temperature
        self.provider_id = f"openai:{model}"

    def complete(self, request: ProviderRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": self.temperature,
        }
        if request.max_output_hint:
            payload["max_tokens"] = max(64, 4 * request.max_output_hint)
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.TransportError as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code in (408, 429, 500, 502, 503, 504):
            raise TransientProviderError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, ValueError) as exc:
            raise TransientProviderError(f"malformed completion payload: {exc}") from exc


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0


@dataclass
class ExchangeRecord:
    """One request/response pair, recorded verbatim before parsing.

    Latency stays on the in-memory record only; the persisted form must be
    deterministic so replays and repeated seeded runs diff clean.
    """

    template_name: str
    prompt: str
    completion: str
    latency_ms: float
    provider_id: str

    def to_dict(self) -> dict:
        return {
            "template": self.template_name,
            "prompt": self.prompt,
            "completion": self.completion,
            "provider": self.provider_id,
        }


class LLMGateway:
    """Runs completions through a provider with retry and exchange recording."""

    def __init__(
        self,
        provider: Provider,
        *,
        retry: RetryPolicy | None = None,
        record_hook: Callable[[ExchangeRecord], None] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.retry = retry or RetryPolicy()
        self.record_hook = record_hook
        self.records: list[ExchangeRecord] = []
        self._sleep = sleep

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            start = time.perf_counter()
            try:
                text = self.provider.complete(request)
            except TransientProviderError as exc:
                last_error = exc
                delay = self.retry.backoff_base * self.retry.backoff_factor**attempt
                log.warning(
                    "provider %s failed (attempt %d/%d): %s",
                    getattr(self.provider, "provider_id", "?"),
                    attempt + 1,
                    self.retry.attempts,
                    exc,
                )
                if attempt + 1 < self.retry.attempts:
                    self._sleep(delay)
                continue
            latency_ms = (time.perf_counter() - start) * 1000.0
            response = ProviderResponse(
                text, latency_ms, getattr(self.provider, "provider_id", "unknown")
            )
            record = ExchangeRecord(
                request.template_name, request.prompt, text, latency_ms, response.provider_id
            )
            self.records.append(record)
            if self.record_hook is not None:
                self.record_hook(record)
            return response
        raise ProviderUnavailableError(
            f"provider failed after {self.retry.attempts} attempts: {last_error}"
        )

    def generate(
        self,
        template: PromptTemplate,
        bindings: Mapping[str, str],
        *,
        max_output_hint: int | None = None,
    ) -> str:
        prompt = render(template, bindings)
        response = self.complete(ProviderRequest(prompt, template.name, max_output_hint))
        return response.text


# --- completion parsing ----------------------------------------------------

_NUMBERING_RE = re.compile(r"^\s*(?:\d+[.)]\s*|[-*]\s+)")


def extract_answer(text: str) -> str:
    """Text after the last ANSWER: marker; the whole text when absent."""
    pos = text.rfind(ANSWER_MARKER)
    if pos < 0:
        return text.strip()
    return text[pos + len(ANSWER_MARKER):].strip()


def parse_lines(text: str, expected_count: int | None = None) -> list[str]:
    """Non-empty lines with list-numbering prefixes ("1.", "-") dropped."""
    lines = [_NUMBERING_RE.sub("", line).strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if expected_count is not None and len(lines) != expected_count:
        raise ParseError(
            f"expected {expected_count} line(s), got {len(lines)}", raw=text
        )
    return lines


_STATUS_LABELS = {
    "not discussed": TopicStatus.NOT_DISCUSSED,
    "being discussed": TopicStatus.BEING_DISCUSSED,
    "well discussed": TopicStatus.WELL_DISCUSSED,
}


def _normalise_label(label: str) -> str:
    return " ".join(label.lower().replace("_", " ").replace("-", " ").split())


def parse_status_labels(
    text: str, subtopics: Sequence[SubTopic]
) -> dict[int, TopicStatus]:
    """Parse "index: status" lines into a status mapping.

    Keys may be 1-based indices or sub-topic titles. Sub-topics left
    unmentioned are simply absent from the result; the caller keeps their
    previous status. Unknown keys or unrecognised labels raise ParseError.
    """
    if not subtopics:
        raise ValueError("subtopics must be non-empty")
    by_title = {topic.title.lower(): topic for topic in subtopics}
    by_position = {str(i + 1): topic for i, topic in enumerate(subtopics)}
    result: dict[int, TopicStatus] = {}
    for line in extract_answer(text).splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, label = line.partition(":")
        if not sep:
            raise ParseError(f"malformed status line: {line!r}", raw=text)
        key = _NUMBERING_RE.sub("", key).strip()
        topic = by_position.get(key) or by_title.get(key.lower())
        if topic is None:
            raise ParseError(f"unknown sub-topic in status line: {line!r}", raw=text)
        status = _STATUS_LABELS.get(_normalise_label(label))
        if status is None:
            raise ParseError(f"unrecognised status label: {label.strip()!r}", raw=text)
        result[topic.index] = status
    if not result:
        raise ParseError("no status lines found", raw=text)
    return result


def build_provider(spec: Mapping[str, object] | None) -> Provider:
    """Provider factory used by the CLI config loader.

    spec kinds: {"kind": "scripted", "script": {...}, "queue": [...], "strict": bool}
    or {"kind": "openai", "base_url": ..., "model": ..., "api_key": ...}.
    A missing spec yields a lenient empty scripted provider.
    """
    if not spec:
        return ScriptedProvider()
    kind = str(spec.get("kind", "scripted"))
    if kind == "scripted":
        return ScriptedProvider(
            script=spec.get("script") or {},
            queue=spec.get("queue") or [],
            strict=bool(spec.get("strict", False)),
        )
    if kind == "openai":
        return OpenAICompatProvider(
            base_url=str(spec["base_url"]),
            model=str(spec["model"]),
            api_key=spec.get("api_key"),
            timeout=float(spec.get("timeout", 60.0)),
            temperature=float(spec.get("temperature", 0.7)),
        )
    raise ValueError(f"unknown provider kind: {kind!r}")


def load_script_file(path: str) -> ScriptedProvider:
    """Build a scripted provider from a JSON file ({"queue": [...], "script": {...}})."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return ScriptedProvider(
        script=data.get("script") or {},
        queue=data.get("queue") or [],
        strict=bool(data.get("strict", False)),
    )
