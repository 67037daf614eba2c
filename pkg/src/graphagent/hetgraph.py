"""Heterogeneous graph data model, file parsing, grounding and serialization.

Graphs are typed: every node carries a meta type, every edge a relation label,
and each edge yields a meta triple (head type, relation, tail type).  The
on-disk inputs are line-oriented: a node file with tab-separated columns
``id<TAB>meta_type<TAB>text`` and an edge file with
``head_id<TAB>relation<TAB>tail_id``.  Tabs and newlines inside the text
column are escaped as ``\\t`` and ``\\n``.  The canonical serialization is a
single JSON document with nodes/edges/types in insertion order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    DanglingEdge,
    DuplicateEdge,
    DuplicateNode,
    MalformedLine,
    UnknownEdge,
)

__all__ = [
    "NodeRecord",
    "EdgeRecord",
    "HeteroGraph",
    "ground_graph",
    "meta_triple",
    "round_trip",
    "parse_node_line",
    "parse_edge_line",
    "escape_field",
    "unescape_field",
]


def escape_field(text: str) -> str:
    """Escape backslash, tab and newline so a field fits on one TSV line."""
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


@dataclass(frozen=True)
class NodeRecord:
    node_id: str
    meta_type: str
    text: str = ""

    def __post_init__(self):
        if not self.node_id:
            raise ValueError("node_id must be nonempty")
        if not self.meta_type:
            raise ValueError("meta_type must be nonempty")


@dataclass(frozen=True)
class EdgeRecord:
    head_id: str
    relation: str
    tail_id: str

    def __post_init__(self):
        if not self.relation:
            raise ValueError("relation must be nonempty")

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.head_id, self.relation, self.tail_id)


@dataclass
class HeteroGraph:
    """Immutable-after-construction typed graph with O(degree) adjacency."""

    nodes: tuple[NodeRecord, ...]
    edges: tuple[EdgeRecord, ...]
    node_types: tuple[str, ...]
    edge_types: tuple[str, ...]
    _by_id: dict[str, NodeRecord] = field(repr=False, compare=False, default_factory=dict)
    _adjacency: dict[str, list[tuple[str, str]]] = field(repr=False, compare=False, default_factory=dict)
    _edge_set: frozenset[tuple[str, str, str]] = field(repr=False, compare=False, default_factory=frozenset)

    @classmethod
    def build(cls, nodes, edges) -> "HeteroGraph":
        """Validate and index nodes/edges; raises on duplicates and dangling edges."""
        nodes = tuple(nodes)
        edges = tuple(edges)
        by_id: dict[str, NodeRecord] = {}
        node_types: list[str] = []
        for n in nodes:
            if n.node_id in by_id:
                raise DuplicateNode(f"duplicate node id {n.node_id!r}")
            by_id[n.node_id] = n
            if n.meta_type not in node_types:
                node_types.append(n.meta_type)
        edge_types: list[str] = []
        seen: set[tuple[str, str, str]] = set()
        adjacency: dict[str, list[tuple[str, str]]] = {nid: [] for nid in by_id}
        for e in edges:
            for endpoint in (e.head_id, e.tail_id):
                if endpoint not in by_id:
                    raise DanglingEdge(
                        f"edge {e.triple} references unknown node {endpoint!r}"
                    )
            if e.triple in seen:
                raise DuplicateEdge(f"duplicate edge {e.triple}")
            seen.add(e.triple)
            if e.relation not in edge_types:
                edge_types.append(e.relation)
            # Undirected adjacency; self loops recorded once.
            adjacency[e.head_id].append((e.tail_id, e.relation))
            if e.tail_id != e.head_id:
                adjacency[e.tail_id].append((e.head_id, e.relation))
        return cls(
            nodes=nodes,
            edges=edges,
            node_types=tuple(node_types),
            edge_types=tuple(edge_types),
            _by_id=by_id,
            _adjacency=adjacency,
            _edge_set=frozenset(seen),
        )

    def node(self, node_id: str) -> NodeRecord:
        return self._by_id[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def neighbors(self, node_id: str) -> list[tuple[str, str]]:
        """Undirected (neighbor_id, relation) incidences of a node."""
        return self._adjacency[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    # --- canonical JSON serialization ---

    def to_json_obj(self) -> dict:
        return {
            "nodes": [
                {"id": n.node_id, "meta_type": n.meta_type, "text": n.text}
                for n in self.nodes
            ],
            "edges": [
                {"head": e.head_id, "relation": e.relation, "tail": e.tail_id}
                for e in self.edges
            ],
            "node_types": list(self.node_types),
            "edge_types": list(self.edge_types),
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json_obj(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def parse(cls, document: str) -> "HeteroGraph":
        obj = json.loads(document)
        nodes = [
            NodeRecord(d["id"], d["meta_type"], d.get("text", ""))
            for d in obj["nodes"]
        ]
        edges = [
            EdgeRecord(d["head"], d["relation"], d["tail"]) for d in obj["edges"]
        ]
        return cls.build(nodes, edges)

    # --- node/edge line serialization (the grounding input format) ---

    def node_lines(self) -> list[str]:
        return [
            "\t".join((n.node_id, n.meta_type, escape_field(n.text)))
            for n in self.nodes
        ]

    def edge_lines(self) -> list[str]:
        return ["\t".join(e.triple) for e in self.edges]


def parse_node_line(line: str, line_no: int = 0) -> NodeRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise MalformedLine(line_no, line, f"expected 3 tab-separated fields, got {len(parts)}")
    node_id, meta_type, text = parts
    if not node_id or not meta_type:
        raise MalformedLine(line_no, line, "empty id or meta_type")
    return NodeRecord(node_id, meta_type, unescape_field(text))


def parse_edge_line(line: str, line_no: int = 0) -> EdgeRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise MalformedLine(line_no, line, f"expected 3 tab-separated fields, got {len(parts)}")
    head, relation, tail = parts
    if not head or not relation or not tail:
        raise MalformedLine(line_no, line, "empty edge field")
    return EdgeRecord(head, relation, tail)


def ground_graph(node_lines, edge_lines) -> HeteroGraph:
    """Parse node/edge text records into a validated :class:`HeteroGraph`.

    Blank lines are skipped.  Node order follows the input; node_types and
    edge_types are exactly the distinct types observed, in first-seen order.
    """
    nodes = []
    for i, line in enumerate(node_lines, start=1):
        if not line.strip():
            continue
        nodes.append(parse_node_line(line, i))
    edges = []
    for i, line in enumerate(edge_lines, start=1):
        if not line.strip():
            continue
        edges.append(parse_edge_line(line, i))
    return HeteroGraph.build(nodes, edges)


def meta_triple(graph: HeteroGraph, edge: EdgeRecord) -> tuple[str, str, str]:
    """Meta-type triple (head type, relation, tail type) of an edge of `graph`."""
    if edge.triple not in graph._edge_set:
        raise UnknownEdge(f"edge {edge.triple} does not belong to this graph")
    return (
        graph.node(edge.head_id).meta_type,
        edge.relation,
        graph.node(edge.tail_id).meta_type,
    )


def round_trip(graph: HeteroGraph) -> HeteroGraph:
    """Serialize to the canonical JSON form and re-parse."""
    return HeteroGraph.parse(graph.serialize())
