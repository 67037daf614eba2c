"""Task execution: system prompt building, graph token rendering, LLM calls.

The builder fills a per-task template with the task type, user annotation and
a per-graph section that lists the meta types present and leaves one
``<graph>`` placeholder per (graph, meta type) block.  Rendering then either
degrades each block to a bounded textual listing or swaps in indexed
embedding markers with the raw vectors attached alongside the request.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    BudgetExceeded,
    CitationOutOfRange,
    LabelNotInCandidates,
    PlaceholderMismatch,
    UnparseableAfterRepair,
)
from .gateway import (
    REPAIR_BUDGET,
    BackendHandle,
    ChatRequest,
    ChatResponse,
    chat,
)
from .hetgraph import HeteroGraph
from .planner import TaskType
from .prompts import TemplateLibrary
from .tokenizer import GraphTokenSequence

GRAPH_PLACEHOLDER = "<graph>"
EMPTY_BLOCK_TEXT = "(no graph tokens)"
DEFAULT_CHAR_BUDGET = 200

CITE_RE = re.compile(r"@CITE\[(\d+)\]@")
_CANDIDATE_QUESTION_RE = re.compile(r"[Ii]s it ([^?]+)\?")
_CANDIDATE_LIST_RE = re.compile(r"[Ll]abel candidates:\s*([^.<>]+)")


@dataclass(frozen=True)
class BlockToken:
    node_id: str
    meta_type: str
    hop: int
    text: str
    vector: tuple[float, ...]


@dataclass
class PromptBundle:
    system_prompt: str
    graph_blocks: list[tuple[str, list[BlockToken]]]
    user_turn: str
    task_type: TaskType
    annotation: str = ""

    def __post_init__(self):
        placeholders = self.system_prompt.count(GRAPH_PLACEHOLDER)
        if placeholders != len(self.graph_blocks):
            raise PlaceholderMismatch(
                f"{placeholders} placeholder(s) for {len(self.graph_blocks)} block(s)"
            )


@dataclass
class ActionResult:
    kind: str  # "prediction" | "generation"
    raw: ChatResponse
    label: str = ""
    reasoning: str = ""
    text: str = ""

    def to_json_obj(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "prediction":
            out.update({"label": self.label, "reasoning": self.reasoning})
        else:
            out["text"] = self.text
        return out


def _graph_section(
    templates: TemplateLibrary,
    family: str,
    section: str,
    graph: HeteroGraph,
    seq: GraphTokenSequence,
) -> tuple[str, list[tuple[str, list[BlockToken]]]]:
    types_present = seq.types_in_order()
    blocks: list[tuple[str, list[BlockToken]]] = []
    for meta_type in types_present:
        tokens = [
            BlockToken(
                node_id=t.node_id,
                meta_type=t.meta_type,
                hop=t.hop,
                text=graph.node(t.node_id).text,
                vector=t.vector,
            )
            for t in seq.tokens_of_type(meta_type)
        ]
        blocks.append((meta_type, tokens))
    all_types = list(graph.node_types) + list(graph.edge_types)
    text = templates.section(family, section).format(
        num_types=len(all_types),
        type_list=", ".join(all_types),
        type_blocks=", ".join(f"{t}: {GRAPH_PLACEHOLDER}" for t in types_present),
    )
    return text + " ", blocks


def build_system_prompt(
    task_type: TaskType,
    annotation: str,
    graph_texts: str,
    graphs: list[tuple[HeteroGraph, GraphTokenSequence]],
    templates: TemplateLibrary,
    *,
    user_turn: str = "",
) -> PromptBundle:
    """Fill the per-task template; byte-stable for identical inputs.

    `graphs` holds one entry, or two (explicit graph first, knowledge graph
    second) for the predefined-graph predictive task.
    """
    if len(graphs) not in (1, 2):
        raise ValueError("graphs must contain one or two entries")
    if len(graphs) == 2 and task_type is not TaskType.PREDICTIVE_PREDEFINED:
        raise ValueError("two graphs are only valid for predictive_predefined")

    family = (
        "action_generative" if task_type is TaskType.OPEN_GENERATION else "action_predictive"
    )
    section_text = ""
    blocks: list[tuple[str, list[BlockToken]]] = []
    if task_type is TaskType.PREDICTIVE_PREDEFINED:
        sections = ["graph_predefined", "graph_skg_additional"][: len(graphs)]
    else:
        sections = ["graph_skg_only"]
    for section, (graph, seq) in zip(sections, graphs):
        text, graph_blocks = _graph_section(templates, family, section, graph, seq)
        section_text += text
        blocks.extend(graph_blocks)

    request_info = ", ".join(p for p in (annotation, graph_texts) if p)
    prompt = templates.section(family).format(
        task_type=task_type.value,
        request_info=request_info,
        graph_section=section_text,
        annotation=annotation,
    )
    if not annotation:
        # Drop the empty trailing annotation slot rather than render "<>.".
        prompt = prompt.replace(".<>.", ".")
    return PromptBundle(
        system_prompt=prompt,
        graph_blocks=blocks,
        user_turn=user_turn or request_info or "Please complete the requested task.",
        task_type=task_type,
        annotation=annotation,
    )


@dataclass
class RenderedRequest:
    request: ChatRequest
    embeddings: list[list[tuple[float, ...]]] = field(default_factory=list)


def _block_listing(tokens: list[BlockToken], clip: int, center: str, center_floor: int) -> str:
    if not tokens:
        return EMPTY_BLOCK_TEXT
    lines = []
    for t in tokens:
        budget = max(clip, center_floor) if t.node_id == center else clip
        lines.append(f"({t.node_id}, {t.meta_type}, {t.hop}, {t.text[:budget]})")
    return "\n".join(lines)


def render_graph_tokens(
    bundle: PromptBundle,
    mode: str,
    *,
    seed: int = 0,
    max_tokens: int = 4096,
    char_budget: int = DEFAULT_CHAR_BUDGET,
    center: str = "",
) -> RenderedRequest:
    """Replace each ``<graph>`` placeholder per the chosen mode.

    ``text_degrade`` writes per-token listing lines "(id, meta_type, hop,
    text)" with clipped text; the center node is never clipped below half of
    the character budget.  ``embedding_passthrough`` writes ``<GRAPH_EMB_k>``
    markers and carries the vectors alongside.  Non-placeholder bytes of the
    system prompt are never altered.
    """
    if mode not in ("text_degrade", "embedding_passthrough"):
        raise ValueError(f"unknown render mode {mode!r}")

    max_chars = 4 * max_tokens
    if mode == "embedding_passthrough":
        parts = bundle.system_prompt.split(GRAPH_PLACEHOLDER)
        rendered = parts[0]
        for k, part in enumerate(parts[1:]):
            rendered += f"<GRAPH_EMB_{k}>" + part
        embeddings = [[t.vector for t in tokens] for _mt, tokens in bundle.graph_blocks]
        request = ChatRequest(
            system_prompt=rendered, messages=(("user", bundle.user_turn),),
            seed=seed, max_tokens=max_tokens,
        )
        return RenderedRequest(request=request, embeddings=embeddings)

    center_floor = char_budget // 2
    clip = char_budget
    while True:
        parts = bundle.system_prompt.split(GRAPH_PLACEHOLDER)
        rendered = parts[0]
        for (part, (_mt, tokens)) in zip(parts[1:], bundle.graph_blocks):
            rendered += _block_listing(tokens, clip, center, center_floor) + part
        if len(rendered) + len(bundle.user_turn) <= max_chars:
            request = ChatRequest(
                system_prompt=rendered, messages=(("user", bundle.user_turn),),
                seed=seed, max_tokens=max_tokens,
            )
            return RenderedRequest(request=request)
        if clip <= 8:
            raise BudgetExceeded(
                f"prompt of {len(rendered)} chars exceeds budget {max_chars} even at "
                "minimum truncation"
            )
        clip //= 2


def parse_label_candidates(annotation: str) -> list[str]:
    """Label candidates declared in an annotation, empty when none declared."""
    m = _CANDIDATE_QUESTION_RE.search(annotation) or _CANDIDATE_LIST_RE.search(annotation)
    if not m:
        return []
    raw = m.group(1).replace(" or ", ",")
    return [c.strip().strip(".") for c in raw.split(",") if c.strip().strip(".")]


_ANSWER_RE = re.compile(r"^\s*Answer:\s*(.+?)\s*$", re.MULTILINE)
_REASONING_RE = re.compile(r"Reasoning:\s*(.*)", re.DOTALL)


def _parse_prediction(content: str) -> tuple[str, str] | None:
    m = _ANSWER_RE.search(content)
    if not m:
        return None
    label = m.group(1).strip().strip(".")
    rm = _REASONING_RE.search(content)
    reasoning = rm.group(1).strip() if rm else ""
    return label, reasoning


def run_predictive(
    bundle: PromptBundle,
    mode: str,
    backend: BackendHandle,
    *,
    seed: int = 0,
    max_tokens: int = 4096,
    candidates: list[str] | None = None,
    center: str = "",
) -> ActionResult:
    """Execute a predictive task and parse (label, reasoning) from the reply.

    When label candidates are present (given explicitly or declared in the
    annotation) the parsed label must case-insensitively match one of them.
    """
    if bundle.task_type is TaskType.OPEN_GENERATION:
        raise ValueError("run_predictive requires a predictive task type")
    if candidates is None:
        candidates = parse_label_candidates(bundle.annotation)

    rendered = render_graph_tokens(
        bundle, mode, seed=seed, max_tokens=max_tokens, center=center
    )
    request = rendered.request
    attempts: list[str] = []
    for attempt in range(REPAIR_BUDGET + 1):
        response = chat(request, backend)
        attempts.append(response.content)
        parsed = _parse_prediction(response.content)
        if parsed is not None:
            break
        if attempt == REPAIR_BUDGET:
            raise UnparseableAfterRepair(
                "prediction reply lacked an 'Answer:' line after repair", attempts
            )
        request = request.extended(
            response.content,
            'Reply again with a first line of exactly "Answer: <label>" and then '
            'a line starting with "Reasoning:".',
        )
    label, reasoning = parsed
    if candidates:
        matched = next((c for c in candidates if c.casefold() == label.casefold()), None)
        if matched is None:
            raise LabelNotInCandidates(
                f"label {label!r} is not among candidates {candidates}"
            )
        label = matched
    return ActionResult(kind="prediction", raw=response, label=label, reasoning=reasoning)


def check_citations(text: str, reference_ids: list[int]) -> None:
    cited = {int(m) for m in CITE_RE.findall(text)}
    allowed = set(reference_ids)
    out_of_range = sorted(cited - allowed)
    if out_of_range:
        raise CitationOutOfRange(
            f"cited reference id(s) {out_of_range} were never provided (valid: {sorted(allowed)})"
        )


def run_generative(
    bundle: PromptBundle,
    mode: str,
    backend: BackendHandle,
    *,
    seed: int = 0,
    max_tokens: int = 4096,
    reference_ids: list[int] | None = None,
    center: str = "",
) -> ActionResult:
    """Execute a generative task; the completion text is returned verbatim.

    When the annotation declares the @CITE[id]@ convention and reference ids
    are known, every cited id must be among them.
    """
    if bundle.task_type is not TaskType.OPEN_GENERATION:
        raise ValueError("run_generative requires the open_generation task type")
    rendered = render_graph_tokens(
        bundle, mode, seed=seed, max_tokens=max_tokens, center=center
    )
    response = chat(rendered.request, backend)
    if reference_ids is not None and "@CITE[" in bundle.annotation:
        check_citations(response.content, reference_ids)
    return ActionResult(kind="generation", raw=response, text=response.content)
