import random

import pytest

from graphagent.hetgraph import EdgeRecord, HeteroGraph, NodeRecord
from graphagent.mock import MockBackend, MockScript
from graphagent.prompts import TemplateLibrary


@pytest.fixture(scope="session")
def templates():
    return TemplateLibrary()


class SequenceBackend:
    """Replays scripted completions in call order (last one repeats)."""

    backend_id = "seq"

    def __init__(self, contents):
        self.contents = list(contents)
        self.calls = 0

    def complete(self, request):
        from graphagent.gateway import ChatResponse

        content = self.contents[min(self.calls, len(self.contents) - 1)]
        self.calls += 1
        return ChatResponse(content=content, backend_id=self.backend_id)


@pytest.fixture
def backend():
    return MockBackend(MockScript())


@pytest.fixture
def movie_graph():
    nodes = [
        NodeRecord("7", "movie", "A thriller about a heist gone wrong"),
        NodeRecord("1", "director", "Jane Smith, known for tense crime films"),
        NodeRecord("2", "actor", "John Doe, leading actor in many dramas"),
        NodeRecord("3", "movie", "A light romantic comedy set in Paris"),
    ]
    edges = [
        EdgeRecord("7", "directed_by", "1"),
        EdgeRecord("7", "acted_in", "2"),
        EdgeRecord("3", "acted_in", "2"),
    ]
    return HeteroGraph.build(nodes, edges)


def make_random_graph(rng: random.Random, n_nodes: int, n_types: int, n_edges: int) -> HeteroGraph:
    """Random connected-ish typed graph for property tests."""
    types = [f"type{t}" for t in range(n_types)]
    nodes = [
        NodeRecord(f"n{i}", rng.choice(types), f"text of node {i}")
        for i in range(n_nodes)
    ]
    relations = ["rel_a", "rel_b"]
    edges = []
    seen = set()
    attempts = 0
    while len(edges) < n_edges and attempts < n_edges * 10:
        attempts += 1
        h, t = rng.choice(nodes).node_id, rng.choice(nodes).node_id
        rel = rng.choice(relations)
        if (h, rel, t) in seen:
            continue
        seen.add((h, rel, t))
        edges.append(EdgeRecord(h, rel, t))
    return HeteroGraph.build(nodes, edges)
