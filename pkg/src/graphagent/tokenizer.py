"""Graph tokenization: text embedding, propagation and subgraph sampling.

Nodes and their type/relation names are embedded as text, propagated through a
parameter-free normalized mean-aggregation recurrence over the undirected
graph, then sampled breadth-first around a center node into an ordered token
sequence for prompt injection.

The offline embedding provider hashes character trigrams into a fixed number
of signed buckets and L2-normalizes, so the whole path runs with no model
weights and is reproducible across platforms.
"""

from __future__ import annotations

import hashlib
import json
import random
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ProviderUnavailable, UnknownNode
from .hetgraph import HeteroGraph

DEFAULT_HASH_DIM = 64
DEFAULT_FANOUT = 10
DEFAULT_HOPS = 2


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


class HashEmbeddingProvider:
    """Seeded feature hashing of character trigrams, L2-normalized.

    Each trigram maps to a (bucket, sign) pair via a keyed blake2b digest;
    texts shorter than three characters hash as a single token.
    """

    def __init__(self, dim: int = DEFAULT_HASH_DIM, seed: int = 0):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._key = str(seed).encode("utf-8")

    def _tokens(self, text: str) -> list[str]:
        if len(text) < 3:
            return [text] if text else []
        return [text[i : i + 3] for i in range(len(text) - 2)]

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float32)
        for token in self._tokens(text):
            digest = hashlib.blake2b(
                token.encode("utf-8"), digest_size=8, key=self._key
            ).digest()
            value = int.from_bytes(digest, "little")
            bucket = value % self.dim
            sign = 1.0 if (value >> 63) & 1 else -1.0
            vec[bucket] += sign
        return _l2_normalize(vec).astype(np.float32)

    def embed(self, texts: list[str]) -> tuple[list[np.ndarray], int]:
        return [self.embed_one(t) for t in texts], self.dim


class HttpEmbeddingProvider:
    """Provider speaking POST /v1/embed {texts} -> {embeddings, dim}."""

    def __init__(self, endpoint: str, *, timeout: float = 30.0, session=None):
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self.dim: int | None = None  # learned from the first response

    def embed(self, texts: list[str]) -> tuple[list[np.ndarray], int]:
        import requests

        try:
            resp = self._session.post(
                f"{self.endpoint}/v1/embed", json={"texts": texts}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        dim = int(payload["dim"])
        if self.dim is None:
            self.dim = dim
        elif dim != self.dim:
            raise DimensionMismatch(f"provider dim changed mid-run: {self.dim} -> {dim}")
        vectors = [np.asarray(v, dtype=np.float32) for v in payload["embeddings"]]
        return vectors, dim


def embed_texts(texts: list[str], provider) -> list[np.ndarray]:
    """One vector per input text; empty strings map to the zero vector."""
    vectors, dim = provider.embed(list(texts))
    if len(vectors) != len(texts):
        raise ProviderUnavailable(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts"
        )
    out = []
    for text, vec in zip(texts, vectors):
        if vec.shape != (dim,):
            raise DimensionMismatch(f"vector of shape {vec.shape}, expected ({dim},)")
        if not np.all(np.isfinite(vec)):
            raise DimensionMismatch("provider returned non-finite entries")
        out.append(np.zeros(dim, dtype=np.float32) if text == "" else vec)
    return out


@dataclass
class EmbeddingMatrix:
    vectors: dict[str, np.ndarray]
    dim: int

    def __post_init__(self):
        for node_id, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DimensionMismatch(
                    f"vector for {node_id!r} has shape {vec.shape}, expected ({self.dim},)"
                )

    def __getitem__(self, node_id: str) -> np.ndarray:
        return self.vectors[node_id]

    # Cache file: '<II' header (dim, count), then per node a '<H' id byte
    # length, the UTF-8 id bytes, and dim little-endian float32 values.
    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", self.dim, len(self.vectors)))
            for node_id, vec in self.vectors.items():
                id_bytes = node_id.encode("utf-8")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(vec.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingMatrix":
        with open(path, "rb") as fh:
            dim, count = struct.unpack("<II", fh.read(8))
            vectors: dict[str, np.ndarray] = {}
            for _ in range(count):
                (id_len,) = struct.unpack("<H", fh.read(2))
                node_id = fh.read(id_len).decode("utf-8")
                vec = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(np.float32)
                vectors[node_id] = vec
        return cls(vectors=vectors, dim=dim)


def embed_graph_texts(graph: HeteroGraph, provider) -> tuple[EmbeddingMatrix, dict[str, np.ndarray]]:
    """Text vectors for every node plus type vectors for node and edge types."""
    node_vecs = embed_texts([n.text for n in graph.nodes], provider)
    type_names = list(graph.node_types) + list(graph.edge_types)
    type_vecs = embed_texts(type_names, provider) if type_names else []
    dim = provider.dim if provider.dim else (len(node_vecs[0]) if node_vecs else 0)
    matrix = EmbeddingMatrix(
        vectors={n.node_id: v for n, v in zip(graph.nodes, node_vecs)}, dim=dim
    )
    return matrix, dict(zip(type_names, type_vecs))


def encode_graph(
    graph: HeteroGraph,
    text_emb: EmbeddingMatrix,
    type_emb: dict[str, np.ndarray],
    layers: int,
) -> EmbeddingMatrix:
    """Parameter-free propagation producing one unit-norm vector per node.

    h0 = normalize(text + node type vector); each layer averages the
    normalized neighbor states offset by the connecting relation's vector and
    blends half-and-half with the node's own state.  Isolated nodes keep h0;
    zero vectors stay zero under normalization.
    """
    if layers < 0:
        raise ValueError("layers must be >= 0")
    dim = text_emb.dim
    for t in list(graph.node_types) + list(graph.edge_types):
        if t not in type_emb:
            raise DimensionMismatch(f"missing type vector for {t!r}")
        if type_emb[t].shape != (dim,):
            raise DimensionMismatch(f"type vector for {t!r} has wrong dimension")

    state: dict[str, np.ndarray] = {}
    for n in graph.nodes:
        state[n.node_id] = _l2_normalize(text_emb[n.node_id] + type_emb[n.meta_type])
    h0 = dict(state)
    for _ in range(layers):
        nxt: dict[str, np.ndarray] = {}
        for n in graph.nodes:
            incidences = graph.neighbors(n.node_id)
            if not incidences:
                nxt[n.node_id] = h0[n.node_id]
                continue
            messages = [
                _l2_normalize(state[j] + type_emb[rel]) for j, rel in incidences
            ]
            mean_msg = np.mean(messages, axis=0)
            nxt[n.node_id] = _l2_normalize(0.5 * state[n.node_id] + 0.5 * mean_msg)
        state = nxt
    return EmbeddingMatrix(vectors={k: v.astype(np.float32) for k, v in state.items()}, dim=dim)


@dataclass(frozen=True)
class GraphToken:
    node_id: str
    meta_type: str
    vector: tuple[float, ...]
    hop: int


@dataclass
class GraphTokenSequence:
    center: str
    tokens: list[GraphToken]
    fanout: int
    hops: int
    seed: int

    def node_ids(self) -> list[str]:
        return [t.node_id for t in self.tokens]

    def types_in_order(self) -> list[str]:
        """Distinct meta types by first appearance in the sequence."""
        seen: list[str] = []
        for t in self.tokens:
            if t.meta_type not in seen:
                seen.append(t.meta_type)
        return seen

    def tokens_of_type(self, meta_type: str) -> list[GraphToken]:
        return [t for t in self.tokens if t.meta_type == meta_type]

    def to_json_obj(self) -> dict:
        return {
            "center": self.center,
            "fanout": self.fanout,
            "hops": self.hops,
            "seed": self.seed,
            "tokens": [
                {
                    "node": t.node_id,
                    "meta_type": t.meta_type,
                    "hop": t.hop,
                    "vector": [round(float(x), 8) for x in t.vector],
                }
                for t in self.tokens
            ],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json_obj(), ensure_ascii=False, indent=1) + "\n"


def node_rng(seed: int, node_id: str) -> random.Random:
    """Per-node stream for neighbor selection, stable across runs/platforms."""
    return random.Random(f"{seed}:{node_id}")


def sample_subgraph(
    graph: HeteroGraph,
    embeddings: EmbeddingMatrix,
    center: str,
    fanout: int = DEFAULT_FANOUT,
    hops: int = DEFAULT_HOPS,
    seed: int = 0,
) -> GraphTokenSequence:
    """Seeded breadth-first expansion around `center`, edges undirected.

    At each frontier node the unvisited distinct neighbors are shuffled with
    that node's seeded stream and the first min(fanout, available) are taken,
    so growing the fanout only extends each node's selection.  Tokens are
    ordered by (hop, selection order) and no node appears twice.
    """
    if not graph.has_node(center):
        raise UnknownNode(f"center node {center!r} not in graph")
    if fanout < 1 or hops < 1:
        raise ValueError("fanout and hops must be >= 1")

    visited = {center}
    frontier = [center]
    token_at_hop: list[tuple[str, int]] = [(center, 0)]
    for hop in range(1, hops + 1):
        next_frontier: list[str] = []
        for node_id in frontier:
            candidates: list[str] = []
            for neighbor, _rel in graph.neighbors(node_id):
                if neighbor not in visited and neighbor not in candidates:
                    candidates.append(neighbor)
            node_rng(seed, node_id).shuffle(candidates)
            for chosen in candidates[:fanout]:
                visited.add(chosen)
                token_at_hop.append((chosen, hop))
                next_frontier.append(chosen)
        frontier = next_frontier
        if not frontier:
            break

    tokens = [
        GraphToken(
            node_id=nid,
            meta_type=graph.node(nid).meta_type,
            vector=tuple(float(x) for x in embeddings[nid]),
            hop=hop,
        )
        for nid, hop in token_at_hop
    ]
    return GraphTokenSequence(center=center, tokens=tokens, fanout=fanout, hops=hops, seed=seed)
