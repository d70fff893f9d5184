"""MLLM backend abstraction: live chat-completions adapter plus record/replay.

The replay key is a digest of prompt content (role, environment text,
reference ids, question text, image content digests), so any byte change in
what the model would see maps to a different fixture entry. Transcript lines
and replay fixtures share one JSONL shape — {digest, request, response, meta}
— which makes every recorded transcript directly replayable.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

from .canonical import digest_json
from .errors import AuthError, IoError, ReplayMiss, TransportError
from .prompts import VisionQuestionPrompt

_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class TextPart:
    text: str

    def to_json(self) -> dict:
        return {"text": self.text}


@dataclass(frozen=True)
class ImagePart:
    digest: str
    media_type: str = "image/png"
    # payload is transport detail, not identity: replay and transcripts key
    # on the content digest and never need the bytes back
    data_base64: str = field(default="", compare=False, repr=False)

    def to_json(self) -> dict:
        return {"image": {"digest": self.digest, "media_type": self.media_type}}


def _part_from_json(d: dict):
    if "text" in d:
        return TextPart(text=d["text"])
    img = d["image"]
    return ImagePart(digest=img["digest"], media_type=img.get("media_type", "image/png"))


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple = ()

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "parts", tuple(self.parts))

    def to_json(self) -> dict:
        return {"role": self.role, "parts": [p.to_json() for p in self.parts]}

    @staticmethod
    def from_json(d: dict) -> "ChatMessage":
        return ChatMessage(role=d["role"], parts=tuple(_part_from_json(p) for p in d["parts"]))


@dataclass(frozen=True)
class ChatExchange:
    digest: str  # prompt digest — the replay key
    request: tuple = ()  # ChatMessages
    response: str = ""
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "digest": self.digest,
            "request": [m.to_json() for m in self.request],
            "response": self.response,
            "meta": self.meta,
        }

    @staticmethod
    def from_json(d: dict) -> "ChatExchange":
        return ChatExchange(
            digest=d["digest"],
            request=tuple(ChatMessage.from_json(m) for m in d["request"]),
            response=d["response"],
            meta=d.get("meta", {}),
        )


class ChatTranscript:
    """Append-only exchange log for one session."""

    def __init__(self, session_id: str):
        self.session_id = session_id
        self._exchanges: list[ChatExchange] = []

    @property
    def exchanges(self) -> tuple:
        return tuple(self._exchanges)

    def append(self, exchange: ChatExchange) -> None:
        self._exchanges.append(exchange)

    def digests(self) -> tuple:
        return tuple(ex.digest for ex in self._exchanges)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(ex.to_json(), ensure_ascii=False) + "\n" for ex in self._exchanges)

    @staticmethod
    def from_jsonl(session_id: str, text: str) -> "ChatTranscript":
        t = ChatTranscript(session_id)
        for line in text.splitlines():
            if line.strip():
                t.append(ChatExchange.from_json(json.loads(line)))
        return t

    def __len__(self) -> int:
        return len(self._exchanges)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ChatTranscript)
            and self.session_id == other.session_id
            and self._exchanges == other._exchanges
        )


def _image_digest(img) -> str:
    d = getattr(img, "digest", None)
    if not d:
        raise ValueError(f"image {img!r} has no content digest")
    return str(d)


def prompt_digest(prompt: VisionQuestionPrompt) -> str:
    """Stable content digest: role, env text, reference ids, question text, image digests."""
    doc = {
        "role": prompt.role_text,
        "environment": prompt.environment.summary_text,
        "captures": [_image_digest(i) for i in prompt.environment.captures],
        "references": [r.id for r in prompt.references.records],
        "question": prompt.question.text,
        "visuals": [_image_digest(i) for i in prompt.question.visuals],
        "schema": prompt.response_schema.value,
    }
    return digest_json(doc)


def _image_part(img) -> ImagePart:
    to_b64 = getattr(img, "to_base64", None)
    return ImagePart(digest=_image_digest(img), data_base64=to_b64() if to_b64 else "")


def messages_from_prompt(prompt: VisionQuestionPrompt) -> tuple:
    """System message carries the role; one user message carries the rest,
    parts ordered exactly like the rendered prompt text."""
    from .prompts import reference_block, _template
    from string import Template

    parts: list = []
    env = prompt.environment
    if env.summary_text or env.captures:
        note = (
            f"\n{len(env.captures)} visual capture(s) of the current scene are attached."
            if env.captures
            else ""
        )
        parts.append(
            TextPart(
                Template(_template("environment")).substitute(
                    summary=env.summary_text, captures_note=note
                )
            )
        )
        parts.extend(_image_part(i) for i in env.captures)
    if prompt.references.records:
        parts.append(
            TextPart(
                Template(_template("reference")).substitute(
                    examples=reference_block(prompt.references)
                )
            )
        )
    parts.append(TextPart(f"Question:\n{prompt.question.text}"))
    parts.extend(_image_part(i) for i in prompt.question.visuals)
    return (
        ChatMessage(role="system", parts=(TextPart(prompt.role_text),)),
        ChatMessage(role="user", parts=tuple(parts)),
    )


class Backend(Protocol):
    def complete(self, digest: str, messages: Sequence[ChatMessage]) -> tuple[str, dict]: ...


def complete(
    prompt: VisionQuestionPrompt,
    backend: Backend,
    transcript: Optional[ChatTranscript] = None,
) -> str:
    digest = prompt_digest(prompt)
    messages = messages_from_prompt(prompt)
    text, meta = backend.complete(digest, messages)
    if transcript is not None:
        transcript.append(
            ChatExchange(digest=digest, request=messages, response=text, meta=meta)
        )
    return text


class LiveBackend:
    """OpenAI-compatible chat-completions adapter (vision content parts).

    Temperature is pinned to 0 by default; transient failures (connection
    errors, 429, 5xx) are retried up to 3 times with exponential backoff.
    """

    TRANSIENT = {429, 500, 502, 503, 504}

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        temperature: float = 0.0,
        max_retries: int = 3,
        timeout: float = 120.0,
        sleeper=time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.max_retries = max_retries
        self.timeout = timeout
        self._sleep = sleeper

    @classmethod
    def from_env(cls, environ) -> "LiveBackend":
        try:
            endpoint = environ["ROOMSMITH_ENDPOINT"]
            model = environ["ROOMSMITH_MODEL"]
        except KeyError as exc:
            raise TransportError(f"live backend needs {exc.args[0]} set") from exc
        return cls(endpoint, model, api_key=environ.get("ROOMSMITH_API_KEY", ""))

    @staticmethod
    def _wire_content(message: ChatMessage):
        if len(message.parts) == 1 and isinstance(message.parts[0], TextPart):
            return message.parts[0].text
        content = []
        for p in message.parts:
            if isinstance(p, TextPart):
                content.append({"type": "text", "text": p.text})
            else:
                url = f"data:{p.media_type};base64,{p.data_base64}"
                content.append({"type": "image_url", "image_url": {"url": url}})
        return content

    def complete(self, digest: str, messages: Sequence[ChatMessage]) -> tuple[str, dict]:
        import requests

        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": m.role, "content": self._wire_content(m)} for m in messages
            ],
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last_error = "no attempt made"
        for attempt in range(self.max_retries):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            started = time.monotonic()
            try:
                resp = requests.post(
                    f"{self.endpoint}/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"backend rejected credentials ({resp.status_code})")
            if resp.status_code in self.TRANSIENT:
                last_error = f"transient status {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise TransportError(f"backend returned {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
            meta = {
                "model": self.model,
                "latency_s": round(time.monotonic() - started, 6),
                "attempts": attempt + 1,
            }
            return text, meta
        raise TransportError(f"gave up after {self.max_retries} attempts: {last_error}")


class ReplayBackend:
    """Serves recorded responses keyed by prompt digest, FIFO per digest."""

    def __init__(self, fixture: str | Path | Sequence[dict]):
        if isinstance(fixture, (str, Path)):
            try:
                lines = Path(fixture).read_text(encoding="utf-8").splitlines()
            except OSError as exc:
                raise IoError(f"cannot read replay fixture: {exc}") from exc
            entries = [json.loads(ln) for ln in lines if ln.strip()]
        else:
            entries = list(fixture)
        self._queues: dict[str, deque] = {}
        for e in entries:
            self._queues.setdefault(e["digest"], deque()).append(e)

    def complete(self, digest: str, messages: Sequence[ChatMessage]) -> tuple[str, dict]:
        queue = self._queues.get(digest)
        if not queue:
            raise ReplayMiss(digest)
        entry = queue.popleft()
        return entry["response"], dict(entry.get("meta", {}))

    def remaining(self) -> int:
        return sum(len(q) for q in self._queues.values())


class RecordingBackend:
    """Decorator persisting every exchange as replay-fixture JSONL."""

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")  # empty session = valid fixture
        except OSError as exc:
            raise IoError(f"cannot open fixture for writing: {exc}") from exc

    def complete(self, digest: str, messages: Sequence[ChatMessage]) -> tuple[str, dict]:
        text, meta = self.inner.complete(digest, messages)
        exchange = ChatExchange(digest=digest, request=tuple(messages), response=text, meta=meta)
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(exchange.to_json(), ensure_ascii=False) + "\n")
        except OSError as exc:
            raise IoError(f"cannot append to fixture: {exc}") from exc
        return text, meta


def record_session(live: Backend, path: str | Path) -> RecordingBackend:
    """Wrap a working backend so the session doubles as a replay fixture."""
    return RecordingBackend(live, path)
