"""Graph-language agent pipeline.

Semantic knowledge graph construction from text, task planning with graph
grounding and tokenization, prompt-built task execution, training-corpus
builders and an evaluation harness — all runnable offline against a
deterministic mock backend.
"""

from .errors import GraphAgentError
from .hetgraph import EdgeRecord, HeteroGraph, NodeRecord, ground_graph
from .pipeline import RunConfig, RunResult, run
from .planner import TaskPlan, TaskType, parse_intent
from .skg import SemanticKnowledgeGraph, build_skg
from .tokenizer import GraphTokenSequence, sample_subgraph

__version__ = "0.1.0"

__all__ = [
    "EdgeRecord",
    "GraphAgentError",
    "GraphTokenSequence",
    "HeteroGraph",
    "NodeRecord",
    "RunConfig",
    "RunResult",
    "SemanticKnowledgeGraph",
    "TaskPlan",
    "TaskType",
    "build_skg",
    "ground_graph",
    "parse_intent",
    "run",
    "sample_subgraph",
    "__version__",
]
