"""Deterministic offline chat backend.

A :class:`MockScript` maps request fingerprints (hash of system prompt,
conversation and seed) to canned completions.  Requests without a scripted
entry fall through to a template responder keyed by the detected prompt
family; every responder is a pure function of the request, so pipeline output
is byte-identical across runs and platforms.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from pathlib import Path

from .gateway import ChatRequest, ChatResponse, extract_first_json

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9'-]+")
_STOPWORDS = frozenset(
    """a an the and or of to in on for with by is are was were be been this that
    these those it its as at from we our you your their they he she i not no
    can will would should could may might do does did have has had such which
    what who whom into over under more most less least very""".split()
)


def fingerprint(request: ChatRequest) -> str:
    payload = json.dumps(
        {
            "system": request.system_prompt,
            "messages": list(request.messages),
            "seed": request.seed,
        },
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _content_words(text: str, limit: int = 4000) -> list[str]:
    words = [w.lower() for w in _WORD_RE.findall(text[:limit])]
    return [w for w in words if w not in _STOPWORDS and len(w) > 2]


def _top_terms(text: str, k: int) -> list[str]:
    words = _content_words(text)
    if not words:
        return []
    counts = Counter(words)
    first_pos = {}
    for i, w in enumerate(words):
        first_pos.setdefault(w, i)
    ranked = sorted(counts, key=lambda w: (-counts[w], first_pos[w]))
    return ranked[:k]


def detect_family(system_prompt: str) -> str:
    """Classify a system prompt into its template family by anchor phrases."""
    if "parsing the following important properties" in system_prompt:
        return "task_parsing"
    if "Do not propose too specific concepts" in system_prompt:
        return "scaffold_step0"
    if "description of the extracted keywords" in system_prompt:
        return "scaffold_stepk"
    if "same number of scaffold nodes as the input" in system_prompt:
        return "augmentation"
    if "judge between two paragraphs" in system_prompt:
        return "judge"
    if "accomplishing diverse user required tasks" in system_prompt:
        if "Answer:" in system_prompt:
            return "action_predictive"
        return "action_generative"
    return "unknown"


def _respond_task_parsing(request: ChatRequest) -> str:
    user = request.messages[-1][1]
    has_files = "uploaded file" in user.lower() or "[files]" in user
    lowered = user.lower()
    if has_files and "<GRAPH_NODE_ID_[" in user:
        task_type, source = "predictive_predefined", "files"
    elif has_files:
        task_type, source = "predictive_predefined", "files"
    elif any(v in lowered for v in ("summariz", "summarise", "write", "generate", "compose", "condense")):
        task_type, source = "open_generation", "inline"
    else:
        task_type, source = "predictive_wild", "inline"
    annotation = " ".join(user.split())[:300]
    return json.dumps(
        {"graph_source": source, "task_type": task_type, "annotation": annotation},
        ensure_ascii=False,
    )


def _respond_scaffold(request: ChatRequest, layer0: bool) -> str:
    user = request.messages[-1][1]
    k = 3 if layer0 else 2
    node_type = "concept" if layer0 else "keyword"
    terms = _top_terms(user, k)
    if not terms:
        terms = ["topic"]
    nodes = [
        {"id": i, "name": term.capitalize() if layer0 else term, "type": node_type}
        for i, term in enumerate(terms)
    ]
    return json.dumps(nodes, ensure_ascii=False)


def _respond_augmentation(request: ChatRequest) -> str:
    user = request.messages[-1][1]
    try:
        nodes = extract_first_json(user)
    except ValueError:
        nodes = []
    if not isinstance(nodes, list) or not nodes:
        return json.dumps([{"id": None, "description": "No nodes were provided."}])
    out = []
    for i, node in enumerate(nodes):
        name = node.get("name", f"node {i}") if isinstance(node, dict) else str(node)
        ident = node.get("id", i) if isinstance(node, dict) else i
        out.append(
            {
                "id": ident,
                "description": f"{name}: a central element of the provided context, "
                "described here deterministically by the offline backend.",
            }
        )
    return json.dumps(out, ensure_ascii=False)


_CANDIDATE_RE = re.compile(r"[Ii]s it ([^?]+)\?")
_CANDIDATE_LIST_RE = re.compile(r"[Ll]abel candidates:\s*([^.<>]+)")


def _find_candidates(text: str) -> list[str]:
    m = _CANDIDATE_RE.search(text) or _CANDIDATE_LIST_RE.search(text)
    if not m:
        return []
    raw = m.group(1).replace(" or ", ",")
    return [c.strip().strip(".") for c in raw.split(",") if c.strip().strip(".")]


def _respond_action_predictive(request: ChatRequest) -> str:
    prompt = request.system_prompt + "\n" + request.messages[-1][1]
    candidates = _find_candidates(prompt)
    label = candidates[0] if candidates else "unknown"
    return (
        f"Answer: {label}\n"
        "Reasoning: selected deterministically by the offline backend from the "
        "provided graph token context."
    )


def _respond_action_generative(request: ChatRequest) -> str:
    user = request.messages[-1][1]
    excerpt = " ".join(user.split())[:240]
    return (
        "Generated content (offline backend): the provided material centers on "
        f"the following request and context: {excerpt}"
    )


def _respond_judge(request: ChatRequest) -> str:
    return (
        "A is better. The first paragraph covers the provided references more "
        "strictly and uses more neutral language."
    )


_RESPONDERS = {
    "task_parsing": _respond_task_parsing,
    "scaffold_step0": lambda r: _respond_scaffold(r, layer0=True),
    "scaffold_stepk": lambda r: _respond_scaffold(r, layer0=False),
    "augmentation": _respond_augmentation,
    "action_predictive": _respond_action_predictive,
    "action_generative": _respond_action_generative,
    "judge": _respond_judge,
}


class MockScript:
    """Canned completions keyed by request fingerprint, with a template fallback."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries: dict[str, str] = dict(entries or {})

    def add(self, request: ChatRequest, content: str) -> str:
        fp = fingerprint(request)
        self.entries[fp] = content
        return fp

    def respond(self, request: ChatRequest) -> str:
        fp = fingerprint(request)
        if fp in self.entries:
            return self.entries[fp]
        family = detect_family(request.system_prompt)
        responder = _RESPONDERS.get(family)
        if responder is None:
            return "I cannot help with that request."
        return responder(request)

    @classmethod
    def load(cls, path: str | Path) -> "MockScript":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(entries=obj.get("entries", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps({"entries": self.entries}, ensure_ascii=False, indent=1) + "\n",
            encoding="utf-8",
        )


class MockBackend:
    backend_id = "mock"

    def __init__(self, script: MockScript | None = None):
        self.script = script or MockScript()

    def complete(self, request: ChatRequest) -> ChatResponse:
        content = self.script.respond(request)
        prompt_chars = len(request.system_prompt) + sum(len(c) for _r, c in request.messages)
        return ChatResponse(
            content=content,
            backend_id=self.backend_id,
            usage=(prompt_chars // 4, len(content) // 4),
        )
