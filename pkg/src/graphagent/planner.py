"""Task planning: parse the user query into a task plan and dispatch a pipeline.

The plan captures where the graph comes from (uploaded files or inline text),
which of the three task types is requested, any extra user annotation, and the
node ids the query points at.  Pipeline dispatch from a plan is a pure table
lookup.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import InconsistentPlan
from .gateway import SCHEMAS, BackendHandle, ChatRequest, chat_structured
from .prompts import TemplateLibrary

NODE_REF_RE = re.compile(r"<GRAPH_NODE_ID_\[([^\]]+)\]>")


class TaskType(str, Enum):
    PREDICTIVE_PREDEFINED = "predictive_predefined"
    PREDICTIVE_WILD = "predictive_wild"
    OPEN_GENERATION = "open_generation"


@dataclass(frozen=True)
class GraphSource:
    kind: str  # "files" | "inline"
    paths: tuple[str, ...] = ()
    text: str = ""

    @classmethod
    def files(cls, paths) -> "GraphSource":
        return cls(kind="files", paths=tuple(str(p) for p in paths))

    @classmethod
    def inline(cls, text: str) -> "GraphSource":
        return cls(kind="inline", text=text)


@dataclass
class TaskPlan:
    graph_source: GraphSource
    task_type: TaskType
    annotation: str = ""
    target_refs: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.task_type is TaskType.PREDICTIVE_PREDEFINED and self.graph_source.kind != "files":
            raise InconsistentPlan(
                "predictive_predefined requires uploaded graph files as the graph source"
            )

    def to_json_obj(self) -> dict:
        if self.graph_source.kind == "files":
            source = {"kind": "files", "paths": list(self.graph_source.paths)}
        else:
            source = {"kind": "inline", "text": self.graph_source.text}
        return {
            "graph_source": source,
            "task_type": self.task_type.value,
            "annotation": self.annotation,
            "target_refs": list(self.target_refs),
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json_obj(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def parse(cls, document: str) -> "TaskPlan":
        obj = json.loads(document)
        src = obj["graph_source"]
        if src["kind"] == "files":
            source = GraphSource.files(src["paths"])
        else:
            source = GraphSource.inline(src["text"])
        return cls(
            graph_source=source,
            task_type=TaskType(obj["task_type"]),
            annotation=obj.get("annotation", ""),
            target_refs=list(obj.get("target_refs", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")


@dataclass(frozen=True)
class PipelinePlan:
    ground_explicit: bool
    build_skg: bool
    skg_seed: str  # "from_text" | "from_explicit_nodes"
    prompt_family: str  # "pred_predefined" | "pred_wild" | "generation"


_PIPELINES = {
    TaskType.PREDICTIVE_PREDEFINED: PipelinePlan(True, True, "from_explicit_nodes", "pred_predefined"),
    TaskType.PREDICTIVE_WILD: PipelinePlan(False, True, "from_text", "pred_wild"),
    TaskType.OPEN_GENERATION: PipelinePlan(False, True, "from_text", "generation"),
}


def make_pipeline(plan: TaskPlan) -> PipelinePlan:
    """Deterministic task-type -> pipeline dispatch."""
    return _PIPELINES[plan.task_type]


def extract_target_refs(text: str) -> list[str]:
    """All <GRAPH_NODE_ID_[...]> references in order, deduplicated."""
    seen: list[str] = []
    for m in NODE_REF_RE.finditer(text):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return seen


def parse_intent(
    user_prompt: str,
    uploaded_paths: list[str],
    backend: BackendHandle,
    templates: TemplateLibrary,
    *,
    seed: int = 0,
) -> TaskPlan:
    """LLM intent parse plus defensive pattern scan for node references.

    The LLM may never fabricate file paths: a "files" source always resolves
    to exactly the uploaded paths, and claiming predictive_predefined without
    uploads is rejected rather than silently fixed.
    """
    if not user_prompt:
        raise ValueError("user_prompt must be nonempty")
    user_turn = user_prompt
    if uploaded_paths:
        user_turn += "\n\n[files] uploaded file paths: " + json.dumps(
            [str(p) for p in uploaded_paths]
        )
    request = ChatRequest(
        system_prompt=templates.system_prompt("task_parsing"),
        messages=(("user", user_turn),),
        seed=seed,
    )
    outcome = chat_structured(request, SCHEMAS["task_plan"], backend)
    parsed = outcome.value
    task_type = TaskType(parsed["task_type"])
    if task_type not in TaskType:
        raise InconsistentPlan(f"unknown task type {parsed['task_type']!r}")

    wants_files = parsed["graph_source"] == "files" or task_type is TaskType.PREDICTIVE_PREDEFINED
    if wants_files and not uploaded_paths:
        raise InconsistentPlan(
            f"plan requires graph files ({task_type.value}) but no files were uploaded"
        )
    if wants_files:
        source = GraphSource.files(uploaded_paths)
    else:
        source = GraphSource.inline(user_prompt)

    # Pattern-scanned refs are unioned with whatever the LLM annotation carries;
    # node ids select the sampling center and must not be silently dropped.
    refs = extract_target_refs(user_prompt)
    for ref in extract_target_refs(parsed["annotation"]):
        if ref not in refs:
            refs.append(ref)
    return TaskPlan(
        graph_source=source,
        task_type=task_type,
        annotation=parsed["annotation"],
        target_refs=refs,
    )
