"""Uniform chat-completion interface plus structured-output parsing.

Backends implement a single ``complete(request) -> ChatResponse`` method; the
deterministic offline backend lives in :mod:`graphagent.mock` and the wire
backend here speaks ``POST /v1/chat`` with body ``{system, messages,
temperature, seed, max_tokens}``.  Structured outputs are JSON documents
embedded in the completion text, extracted by a balanced-bracket scan and
validated against a small registry of shapes; malformed completions get a
bounded number of repair turns.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

from .errors import (
    BackendUnavailable,
    GatewayError,
    ResponseTooLong,
    Timeout,
    UnparseableAfterRepair,
)

logger = logging.getLogger(__name__)

REPAIR_BUDGET = 2
REPAIR_INSTRUCTION = (
    "Your previous reply could not be parsed ({reason}). "
    "Respond again with only the requested JSON, no surrounding prose."
)


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 4096

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be nonempty")
        for i, (role, _content) in enumerate(self.messages):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(
                    f"roles must alternate starting with user; position {i} is {role!r}"
                )
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def extended(self, assistant_reply: str, user_followup: str) -> "ChatRequest":
        """New request continuing the conversation by one exchange."""
        return ChatRequest(
            system_prompt=self.system_prompt,
            messages=self.messages + (("assistant", assistant_reply), ("user", user_followup)),
            temperature=self.temperature,
            seed=self.seed,
            max_tokens=self.max_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    backend_id: str
    usage: tuple[int, int] = (0, 0)  # (prompt_tokens, completion_tokens)


class BackendHandle(Protocol):
    backend_id: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class TransientBackendError(GatewayError):
    """Retryable failure (HTTP 429/5xx, connection error)."""


def chat(
    request: ChatRequest,
    backend: BackendHandle,
    *,
    max_retries: int = 3,
    backoff_base: float = 0.25,
) -> ChatResponse:
    """Call the backend, retrying transient failures with exponential backoff."""
    last: Exception | None = None
    for attempt in range(max_retries):
        try:
            response = backend.complete(request)
        except TransientBackendError as exc:
            last = exc
            if attempt + 1 < max_retries:
                delay = backoff_base * (2 ** attempt)
                logger.warning("transient backend failure (%s), retrying in %.2fs", exc, delay)
                time.sleep(delay)
            continue
        if len(response.content) > 8 * request.max_tokens:
            raise ResponseTooLong(
                f"completion of {len(response.content)} chars exceeds budget for "
                f"max_tokens={request.max_tokens}"
            )
        return response
    raise BackendUnavailable(f"backend failed after {max_retries} attempts: {last}")


class HttpBackend:
    """Wire backend for any server speaking the sidecar chat protocol."""

    def __init__(self, endpoint: str, *, timeout: float = 30.0, session=None):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.backend_id = f"http:{self.endpoint}"
        self._session = session or requests.Session()

    def complete(self, request: ChatRequest) -> ChatResponse:
        import requests

        body = {
            "system": request.system_prompt,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "seed": request.seed,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = self._session.post(
                f"{self.endpoint}/v1/chat", json=body, timeout=self.timeout
            )
        except requests.Timeout as exc:
            raise Timeout(f"chat request timed out after {self.timeout}s") from exc
        except requests.RequestException as exc:
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        usage = payload.get("usage", {})
        return ChatResponse(
            content=payload["content"],
            backend_id=self.backend_id,
            usage=(usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)),
        )


# --- structured output parsing ---


def extract_first_json(text: str) -> Any:
    """First well-formed JSON object or array embedded in `text`.

    Scans for balanced ``{}``/``[]`` regions (string- and escape-aware) and
    returns the first one that decodes.  Raises ValueError when none does.
    """
    openers = {"{": "}", "[": "]"}
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in openers:
            depth = 0
            in_str = False
            escaped = False
            for j in range(i, n):
                c = text[j]
                if in_str:
                    if escaped:
                        escaped = False
                    elif c == "\\":
                        escaped = True
                    elif c == '"':
                        in_str = False
                    continue
                if c == '"':
                    in_str = True
                elif c in "{[":
                    depth += 1
                elif c in "}]":
                    depth -= 1
                    if depth == 0:
                        candidate = text[i : j + 1]
                        try:
                            return json.loads(candidate)
                        except json.JSONDecodeError:
                            break
        i += 1
    raise ValueError("no well-formed JSON object or array found")


@dataclass(frozen=True)
class SchemaDescriptor:
    """A registered output shape: a name plus a normalizing validator.

    ``validate`` raises ValueError on shape violations and returns the
    normalized value otherwise.
    """

    name: str
    validate: Callable[[Any], Any]


def _validate_scaffold_nodes(value: Any) -> list[dict]:
    # An empty array is well-formed; the caller decides whether zero nodes
    # means a pruned branch or a fatal extraction.
    if not isinstance(value, list):
        raise ValueError("expected a JSON array of scaffold nodes")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise ValueError(f"scaffold node {i} is not an object")
        name = str(item.get("name", "")).strip()
        if not name:
            raise ValueError(f"scaffold node {i} has an empty name")
        out.append(
            {
                "id": item.get("id", i),
                "name": name,
                "type": str(item.get("type", "")).strip() or "concept",
            }
        )
    return out


def _validate_descriptions(value: Any) -> list[dict]:
    if not isinstance(value, list) or not value:
        raise ValueError("expected a nonempty JSON array of descriptions")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, str):
            desc = item.strip()
            ident = None
        elif isinstance(item, dict):
            desc = str(item.get("description", "")).strip()
            ident = item.get("id")
        else:
            raise ValueError(f"description {i} is neither string nor object")
        if not desc:
            raise ValueError(f"description {i} is empty")
        out.append({"id": ident, "description": desc})
    return out


TASK_TYPES = ("predictive_predefined", "predictive_wild", "open_generation")


def _validate_task_plan(value: Any) -> dict:
    if not isinstance(value, dict):
        raise ValueError("expected a JSON object")
    task_type = value.get("task_type")
    if task_type not in TASK_TYPES:
        raise ValueError(f"task_type must be one of {TASK_TYPES}, got {task_type!r}")
    source = value.get("graph_source")
    if source not in ("files", "inline"):
        raise ValueError('graph_source must be "files" or "inline"')
    return {
        "graph_source": source,
        "task_type": task_type,
        "annotation": str(value.get("annotation", "")),
    }


def _validate_judge_verdict(value: Any) -> dict:
    if not isinstance(value, dict):
        raise ValueError("expected a JSON object")
    winner = value.get("winner")
    if winner not in ("A", "B", "tie"):
        raise ValueError('winner must be "A", "B" or "tie"')
    rationale = str(value.get("rationale", "")).strip()
    if not rationale:
        raise ValueError("rationale must be nonempty")
    return {"winner": winner, "rationale": rationale}


SCHEMAS: dict[str, SchemaDescriptor] = {
    "scaffold_nodes": SchemaDescriptor("scaffold_nodes", _validate_scaffold_nodes),
    "descriptions": SchemaDescriptor("descriptions", _validate_descriptions),
    "task_plan": SchemaDescriptor("task_plan", _validate_task_plan),
    "judge_verdict": SchemaDescriptor("judge_verdict", _validate_judge_verdict),
}


@dataclass
class ParseOutcome:
    value: Any
    attempts_used: int
    raw_attempts: list[str] = field(default_factory=list)


def parse_structured(
    response: ChatResponse,
    schema: SchemaDescriptor,
    *,
    request: ChatRequest | None = None,
    backend: BackendHandle | None = None,
    max_repairs: int = REPAIR_BUDGET,
) -> ParseOutcome:
    """Extract and validate the schema'd JSON payload of a completion.

    When `request` and `backend` are supplied, a parse failure triggers up to
    `max_repairs` correction turns (the raw reply plus a fix-it instruction
    appended to the conversation) before giving up.  Idempotent on valid
    content; the response object is never mutated.
    """
    attempts: list[str] = []
    current_response = response
    current_request = request
    for attempt in range(1, max_repairs + 2):
        attempts.append(current_response.content)
        try:
            raw = extract_first_json(current_response.content)
            value = schema.validate(raw)
            return ParseOutcome(value=value, attempts_used=attempt, raw_attempts=attempts)
        except ValueError as exc:
            reason = str(exc)
        if current_request is None or backend is None or attempt > max_repairs:
            break
        logger.info("structured parse failed (%s); issuing repair turn %d", reason, attempt)
        current_request = current_request.extended(
            current_response.content, REPAIR_INSTRUCTION.format(reason=reason)
        )
        current_response = chat(current_request, backend)
    raise UnparseableAfterRepair(
        f"could not parse {schema.name} after {len(attempts)} attempt(s): {reason}",
        attempts,
    )


def chat_structured(
    request: ChatRequest,
    schema: SchemaDescriptor,
    backend: BackendHandle,
    *,
    max_repairs: int = REPAIR_BUDGET,
) -> ParseOutcome:
    """chat() followed by parse_structured() with repair wired up."""
    response = chat(request, backend)
    return parse_structured(
        response, schema, request=request, backend=backend, max_repairs=max_repairs
    )
