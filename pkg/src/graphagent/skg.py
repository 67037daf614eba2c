"""Layered semantic knowledge graph construction from text.

Building alternates two phases per iteration: scaffold node extraction (key
concepts or entities) and description augmentation (filling each node with a
detailed textual attribute).  Iteration k >= 1 re-extracts from each previous
node's augmented description, recording a derivation edge from that parent to
every child it produced.  Nodes with the same normalized name within a layer
are merged, taking the union of their parents.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CountMismatchAfterRepair, EmptyExtraction, SkgError
from .gateway import (
    REPAIR_BUDGET,
    REPAIR_INSTRUCTION,
    BackendHandle,
    ChatRequest,
    SCHEMAS,
    chat,
    chat_structured,
    extract_first_json,
)
from .hetgraph import EdgeRecord, HeteroGraph, NodeRecord
from .prompts import TemplateLibrary

logger = logging.getLogger(__name__)

DERIVES_RELATION = "derives"
KEYWORD_TYPE = "keyword"

_WS_RE = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Merge key for scaffold nodes: case-fold, collapse spaces, trim punctuation."""
    collapsed = _WS_RE.sub(" ", name).strip()
    return collapsed.strip(string.punctuation + " ").casefold()


@dataclass
class ScaffoldNode:
    skg_id: str
    layer: int
    name: str
    meta_type: str
    description: str = ""

    def to_json_obj(self) -> dict:
        return {
            "id": self.skg_id,
            "layer": self.layer,
            "name": self.name,
            "meta_type": self.meta_type,
            "description": self.description,
        }


@dataclass(frozen=True)
class DerivationEdge:
    parent_id: str
    child_id: str


@dataclass
class SemanticKnowledgeGraph:
    layers: list[list[ScaffoldNode]]
    edges: list[DerivationEdge]
    source_digest: str
    merges: list[tuple[str, str]] = field(default_factory=list)  # (dropped name, kept id)

    @property
    def nodes(self) -> list[ScaffoldNode]:
        return [n for layer in self.layers for n in layer]

    def node(self, skg_id: str) -> ScaffoldNode:
        for n in self.nodes:
            if n.skg_id == skg_id:
                return n
        raise KeyError(skg_id)

    def validate(self) -> None:
        """Layering, parentage and merge invariants; raises SkgError on violation."""
        by_id = {}
        for k, layer in enumerate(self.layers):
            names = set()
            for n in layer:
                if n.layer != k:
                    raise SkgError(f"node {n.skg_id} stored at layer {k} claims layer {n.layer}")
                key = normalize_name(n.name)
                if key in names:
                    raise SkgError(f"duplicate normalized name {key!r} in layer {k}")
                names.add(key)
                by_id[n.skg_id] = n
        parents: dict[str, int] = {}
        for e in self.edges:
            if e.parent_id not in by_id or e.child_id not in by_id:
                raise SkgError(f"derivation edge references unknown node: {e}")
            if by_id[e.child_id].layer != by_id[e.parent_id].layer + 1:
                raise SkgError(f"derivation edge {e} does not connect consecutive layers")
            parents[e.child_id] = parents.get(e.child_id, 0) + 1
        for k, layer in enumerate(self.layers):
            if k == 0:
                continue
            for n in layer:
                if parents.get(n.skg_id, 0) < 1:
                    raise SkgError(f"node {n.skg_id} at layer {k} has no parent")

    # --- serialization ---

    def to_json_obj(self) -> dict:
        return {
            "source_digest": self.source_digest,
            "layers": [[n.to_json_obj() for n in layer] for layer in self.layers],
            "edges": [{"parent": e.parent_id, "child": e.child_id} for e in self.edges],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json_obj(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def parse(cls, document: str) -> "SemanticKnowledgeGraph":
        obj = json.loads(document)
        layers = [
            [
                ScaffoldNode(d["id"], d["layer"], d["name"], d["meta_type"], d["description"])
                for d in layer
            ]
            for layer in obj["layers"]
        ]
        edges = [DerivationEdge(d["parent"], d["child"]) for d in obj["edges"]]
        skg = cls(layers=layers, edges=edges, source_digest=obj["source_digest"])
        skg.validate()
        return skg

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SemanticKnowledgeGraph":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def extract_scaffold(
    input_text: str,
    layer: int,
    backend: BackendHandle,
    templates: TemplateLibrary,
    *,
    seed: int = 0,
    start_ordinal: int = 0,
) -> list[ScaffoldNode]:
    """One extraction call: scaffold nodes for `input_text` at `layer`.

    Layer 0 uses the top-level-aspects prompt; deeper layers use the
    fine-grained-keywords prompt and force the "keyword" meta type.
    """
    if not input_text:
        raise ValueError("input_text must be nonempty")
    family = "scaffold_step0" if layer == 0 else "scaffold_stepk"
    request = ChatRequest(
        system_prompt=templates.system_prompt(family),
        messages=(("user", input_text),),
        seed=seed,
    )
    outcome = chat_structured(request, SCHEMAS["scaffold_nodes"], backend)
    if not outcome.value:
        raise EmptyExtraction(f"extraction at layer {layer} returned zero nodes")
    nodes = []
    for i, item in enumerate(outcome.value):
        meta_type = item["type"] if layer == 0 else KEYWORD_TYPE
        nodes.append(
            ScaffoldNode(
                skg_id=f"skg:{layer}:{start_ordinal + i}",
                layer=layer,
                name=item["name"].strip(),
                meta_type=meta_type,
            )
        )
    return nodes


def _augment_user_turn(context_text: str, nodes: list[ScaffoldNode]) -> str:
    listing = json.dumps(
        [{"id": n.skg_id, "name": n.name} for n in nodes], ensure_ascii=False
    )
    return f"Context:\n{context_text}\n\nScaffold nodes:\n{listing}"


def augment_descriptions(
    context_text: str,
    nodes: list[ScaffoldNode],
    backend: BackendHandle,
    templates: TemplateLibrary,
    *,
    seed: int = 0,
) -> tuple[list[ScaffoldNode], int]:
    """Fill each node's description; returns (nodes, attempts_used).

    The output count must equal the input count; a mismatch (or unparseable
    reply) triggers bounded repair turns before erroring.
    """
    if not nodes:
        raise ValueError("nodes must be nonempty")
    request = ChatRequest(
        system_prompt=templates.system_prompt("augmentation"),
        messages=(("user", _augment_user_turn(context_text, nodes)),),
        seed=seed,
    )
    schema = SCHEMAS["descriptions"]
    reason = "no attempt made"
    for attempt in range(1, REPAIR_BUDGET + 2):
        response = chat(request, backend)
        try:
            value = schema.validate(extract_first_json(response.content))
        except ValueError as exc:
            reason = str(exc)
            value = None
        if value is not None and len(value) != len(nodes):
            reason = f"expected {len(nodes)} descriptions, got {len(value)}"
            value = None
        if value is not None:
            by_id = {d["id"]: d["description"] for d in value if d["id"] is not None}
            use_ids = set(by_id) == {n.skg_id for n in nodes}
            for i, node in enumerate(nodes):
                node.description = by_id[node.skg_id] if use_ids else value[i]["description"]
            return nodes, attempt
        if attempt > REPAIR_BUDGET:
            break
        request = request.extended(response.content, REPAIR_INSTRUCTION.format(reason=reason))
    raise CountMismatchAfterRepair(
        f"augmentation failed after {REPAIR_BUDGET + 1} attempts: {reason}"
    )


def _merge_layer(
    raw: list[tuple[ScaffoldNode, list[str]]],
) -> tuple[list[ScaffoldNode], dict[str, list[str]], list[tuple[str, str]]]:
    """Merge same-normalized-name nodes; returns (nodes, child_id -> parent ids, merges)."""
    merged: list[ScaffoldNode] = []
    by_key: dict[str, ScaffoldNode] = {}
    parent_map: dict[str, list[str]] = {}
    merges: list[tuple[str, str]] = []
    for node, parents in raw:
        key = normalize_name(node.name)
        kept = by_key.get(key)
        if kept is None:
            by_key[key] = node
            merged.append(node)
            parent_map[node.skg_id] = list(parents)
        else:
            merges.append((node.name, kept.skg_id))
            for p in parents:
                if p not in parent_map[kept.skg_id]:
                    parent_map[kept.skg_id].append(p)
    return merged, parent_map, merges


def seed_nodes_from_graph(nodes: list[NodeRecord]) -> list[ScaffoldNode]:
    """Layer-0 scaffold nodes seeded from observed explicit graph nodes.

    Original meta types are kept; the node text (or id, when text is empty)
    becomes the scaffold name.
    """
    out = []
    for i, n in enumerate(nodes):
        out.append(
            ScaffoldNode(
                skg_id=f"skg:0:{i}",
                layer=0,
                name=n.text.strip() or n.node_id,
                meta_type=n.meta_type,
            )
        )
    return out


def build_skg(
    input_text: str,
    iterations: int,
    backend: BackendHandle,
    templates: TemplateLibrary,
    *,
    seed: int = 0,
    seed_nodes: list[ScaffoldNode] | None = None,
) -> SemanticKnowledgeGraph:
    """Run the iterative two-phase loop for `iterations` layers.

    Zero extracted nodes is fatal at layer 0 and prunes the branch at deeper
    layers.  `seed_nodes` replaces layer-0 extraction for tasks where explicit
    graph nodes act as the initial scaffold.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if seed_nodes is not None:
        raw0 = [(n, []) for n in seed_nodes]
        digest_input = json.dumps([n.to_json_obj() for n in seed_nodes], sort_keys=True)
    else:
        raw0 = [(n, []) for n in extract_scaffold(input_text, 0, backend, templates, seed=seed)]
        digest_input = input_text
    source_digest = hashlib.sha256(digest_input.encode("utf-8")).hexdigest()

    layer0, _parents0, merges = _merge_layer(raw0)
    augment_descriptions(input_text or "(seeded from explicit graph nodes)", layer0, backend, templates, seed=seed)

    layers = [layer0]
    edges: list[DerivationEdge] = []
    all_merges = list(merges)
    for k in range(1, iterations):
        raw: list[tuple[ScaffoldNode, list[str]]] = []
        ordinal = 0
        for parent in layers[k - 1]:
            if not parent.description:
                continue
            try:
                children = extract_scaffold(
                    parent.description, k, backend, templates, seed=seed, start_ordinal=ordinal
                )
            except EmptyExtraction:
                logger.info("pruning branch of %s at layer %d (empty extraction)", parent.skg_id, k)
                continue
            ordinal += len(children)
            raw.extend((child, [parent.skg_id]) for child in children)
        if not raw:
            logger.info("no nodes extracted at layer %d; stopping early", k)
            break
        merged, parent_map, merges_k = _merge_layer(raw)
        all_merges.extend(merges_k)
        for child in merged:
            for pid in parent_map[child.skg_id]:
                edges.append(DerivationEdge(pid, child.skg_id))
        context = "\n\n".join(p.description for p in layers[k - 1] if p.description)
        augment_descriptions(context, merged, backend, templates, seed=seed)
        layers.append(merged)

    skg = SemanticKnowledgeGraph(
        layers=layers, edges=edges, source_digest=source_digest, merges=all_merges
    )
    skg.validate()
    return skg


def to_hetero(skg: SemanticKnowledgeGraph) -> HeteroGraph:
    """Ground an SKG into the common heterogeneous graph form."""
    nodes = []
    for n in skg.nodes:
        text = f"{n.name}: {n.description}" if n.description else n.name
        nodes.append(NodeRecord(n.skg_id, n.meta_type, text))
    edges = [EdgeRecord(e.parent_id, DERIVES_RELATION, e.child_id) for e in skg.edges]
    return HeteroGraph.build(nodes, edges)
