"""End-to-end run orchestration and run-directory artifact management.

One run executes plan -> (optional) explicit-graph grounding -> semantic
knowledge graph construction -> tokenization -> action, writing every
intermediate artifact into a run directory.  Artifacts carry no timestamps, so
re-running with identical inputs and seeds reproduces the directory bitwise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .action import (
    ActionResult,
    build_system_prompt,
    parse_label_candidates,
    render_graph_tokens,
    run_generative,
    run_predictive,
)
from .errors import GraphAgentError
from .gateway import HttpBackend
from .hetgraph import HeteroGraph, ground_graph
from .mock import MockBackend, MockScript
from .planner import TaskPlan, TaskType, make_pipeline, parse_intent
from .prompts import TemplateLibrary
from .skg import SemanticKnowledgeGraph, build_skg, seed_nodes_from_graph, to_hetero
from .tokenizer import (
    DEFAULT_HASH_DIM,
    GraphTokenSequence,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    embed_graph_texts,
    encode_graph,
    sample_subgraph,
)

STAGES = ("plan", "ground", "skg", "tokenize", "action", "eval")

EXIT_CODES = {
    "plan": 2,
    "ground": 3,
    "skg": 4,
    "tokenize": 5,
    "action": 6,
    "eval": 7,
}


class StageError(GraphAgentError):
    """A pipeline stage failed; carries the stage name for exit-code mapping."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    backend: str = "mock"  # "mock" | "http"
    endpoint: str = ""
    iterations: int = 2
    fanout: int = 10
    hops: int = 2
    seed: int = 0
    render_mode: str = "text_degrade"  # | "embedding_passthrough"
    template_dir: str = ""
    hash_dim: int = DEFAULT_HASH_DIM
    script_path: str = ""  # optional canned-completion script for the mock backend
    propagation_layers: int = 2

    def __post_init__(self):
        if self.backend not in ("mock", "http"):
            raise ValueError(f"backend must be 'mock' or 'http', got {self.backend!r}")
        if self.backend == "http" and not self.endpoint:
            raise ValueError("http backend requires an endpoint")
        if self.render_mode not in ("text_degrade", "embedding_passthrough"):
            raise ValueError(f"unknown render_mode {self.render_mode!r}")
        for name in ("iterations", "fanout", "hops", "hash_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.propagation_layers < 0:
            raise ValueError("propagation_layers must be >= 0")

    def to_json_obj(self) -> dict:
        return asdict(self)


def make_backend(config: RunConfig):
    if config.backend == "http":
        return HttpBackend(config.endpoint)
    script = MockScript.load(config.script_path) if config.script_path else MockScript()
    return MockBackend(script)


def make_provider(config: RunConfig):
    if config.backend == "http":
        return HttpEmbeddingProvider(config.endpoint)
    return HashEmbeddingProvider(dim=config.hash_dim, seed=config.seed)


def make_templates(config: RunConfig) -> TemplateLibrary:
    return TemplateLibrary(config.template_dir or None)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def _encode_and_sample(
    graph: HeteroGraph, center: str, provider, config: RunConfig
) -> GraphTokenSequence:
    text_emb, type_emb = embed_graph_texts(graph, provider)
    encoded = encode_graph(graph, text_emb, type_emb, config.propagation_layers)
    return sample_subgraph(
        graph, encoded, center,
        fanout=config.fanout, hops=config.hops, seed=config.seed,
    )


@dataclass
class RunResult:
    plan: TaskPlan
    result: ActionResult
    run_dir: Path
    skg: SemanticKnowledgeGraph


def run(
    query: str,
    files: list[str],
    config: RunConfig,
    run_dir: str | Path,
) -> RunResult:
    """Execute the full pipeline for one user query.

    `files`, when given, are the explicit-graph inputs in node-file, edge-file
    order.  All artifacts land in `run_dir`; partial artifacts are kept when a
    stage fails so the failure can be inspected.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    templates = make_templates(config)
    backend = make_backend(config)
    provider = make_provider(config)

    try:
        plan = parse_intent(query, files, backend, templates, seed=config.seed)
        pipe = make_pipeline(plan)
        plan.save(run_dir / "plan.json")
    except GraphAgentError as exc:
        raise StageError("plan", exc) from exc

    explicit_graph = None
    center = ""
    explicit_seq = None
    if pipe.ground_explicit:
        try:
            node_path, edge_path = (Path(p) for p in plan.graph_source.paths[:2])
            explicit_graph = ground_graph(
                node_path.read_text(encoding="utf-8").splitlines(),
                edge_path.read_text(encoding="utf-8").splitlines(),
            )
            (run_dir / "explicit_graph.json").write_text(
                explicit_graph.serialize(), encoding="utf-8"
            )
        except (OSError, ValueError, GraphAgentError) as exc:
            raise StageError("ground", exc) from exc

        try:
            center = plan.target_refs[0] if plan.target_refs else explicit_graph.nodes[0].node_id
            explicit_seq = _encode_and_sample(explicit_graph, center, provider, config)
            (run_dir / "tokens_explicit.json").write_text(
                explicit_seq.serialize(), encoding="utf-8"
            )
        except GraphAgentError as exc:
            raise StageError("tokenize", exc) from exc

    try:
        if pipe.skg_seed == "from_explicit_nodes":
            # The sampled neighborhood of the target node seeds the SKG; its
            # node texts are what the knowledge graph should elaborate.
            seed_records = [explicit_graph.node(nid) for nid in explicit_seq.node_ids()]
            seed_text = "\n".join(n.text for n in seed_records if n.text) or query
            skg = build_skg(
                seed_text, config.iterations, backend, templates,
                seed=config.seed, seed_nodes=seed_nodes_from_graph(seed_records),
            )
        else:
            source_text = plan.graph_source.text or query
            skg = build_skg(
                source_text, config.iterations, backend, templates, seed=config.seed
            )
        skg.save(run_dir / "skg.json")
        skg_graph = to_hetero(skg)
        (run_dir / "skg_graph.json").write_text(skg_graph.serialize(), encoding="utf-8")
    except GraphAgentError as exc:
        raise StageError("skg", exc) from exc

    try:
        skg_center = skg_graph.nodes[0].node_id
        skg_seq = _encode_and_sample(skg_graph, skg_center, provider, config)
        (run_dir / "tokens_skg.json").write_text(skg_seq.serialize(), encoding="utf-8")
    except GraphAgentError as exc:
        raise StageError("tokenize", exc) from exc

    try:
        if plan.task_type is TaskType.PREDICTIVE_PREDEFINED:
            graphs = [(explicit_graph, explicit_seq), (skg_graph, skg_seq)]
            context_text = explicit_graph.node(center).text
        else:
            graphs = [(skg_graph, skg_seq)]
            context_text = (plan.graph_source.text or query)[:200]
        bundle = build_system_prompt(
            plan.task_type, plan.annotation, context_text, graphs, templates,
            user_turn=query,
        )
        rendered = render_graph_tokens(
            bundle, config.render_mode, seed=config.seed, center=center
        )
        (run_dir / "prompt.txt").write_text(
            rendered.request.system_prompt + "\n\n[user]\n" + bundle.user_turn,
            encoding="utf-8",
        )
        if plan.task_type is TaskType.OPEN_GENERATION:
            result = run_generative(
                bundle, config.render_mode, backend, seed=config.seed, center=center
            )
        else:
            result = run_predictive(
                bundle, config.render_mode, backend, seed=config.seed,
                candidates=parse_label_candidates(plan.annotation) or None,
                center=center,
            )
        _write_json(run_dir / "result.json", result.to_json_obj())
    except GraphAgentError as exc:
        raise StageError("action", exc) from exc

    manifest = {
        "backend_id": backend.backend_id,
        "config": config.to_json_obj(),
        "template_digests": dict(sorted(templates.digests.items())),
        "artifacts": sorted(
            p.name for p in run_dir.iterdir() if p.is_file() and p.name != "manifest.json"
        ),
    }
    _write_json(run_dir / "manifest.json", manifest)
    return RunResult(plan=plan, result=result, run_dir=run_dir, skg=skg)
