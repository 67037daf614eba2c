"""Training-corpus construction: alignment pairs, multi-task records, shards.

Alignment entries pair a sequence of graph tokens with the text sequence a
trainer must reproduce, either within one meta type (intra) or spanning
several (inter).  Multi-task records pair task-typed system prompts with
inputs and gold targets.  Epoch shards mix the three categories with
curriculum ratios and largest-remainder rounding, one JSON object per line
with a metadata header line.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    CannotSatisfyDiversity,
    EmptySource,
    InstructDataError,
    MissingReasoning,
    NoEligibleType,
)
from .planner import TaskType

logger = logging.getLogger(__name__)

DEFAULT_SEQ_LEN = 4
INTER_MAX_RETRIES = 64

# Per-epoch (alignment%, predictive%, generative%) mixing ratios; epochs past
# the table reuse the last row.
CURRICULUM_SCHEDULE: dict[int, tuple[int, int, int]] = {
    1: (10, 70, 20),
    2: (5, 60, 35),
    3: (0, 50, 50),
    4: (0, 40, 60),
}


def curriculum_ratios(epoch: int) -> tuple[int, int, int]:
    if epoch < 1:
        raise ValueError("epoch must be >= 1")
    row = CURRICULUM_SCHEDULE.get(min(epoch, max(CURRICULUM_SCHEDULE)))
    assert sum(row) == 100
    return row


@dataclass(frozen=True)
class TokenTextPair:
    node_id: str
    meta_type: str
    text: str
    type_text: str

    def __post_init__(self):
        if not self.text or not self.type_text:
            raise ValueError("text and type_text must be nonempty")


@dataclass
class AlignmentEntry:
    kind: str  # "intra" | "inter"
    graph_seq: list[TokenTextPair]
    text_seq: list[tuple[str, str]]  # (text, type_text) per position

    def __post_init__(self):
        if len(self.graph_seq) != len(self.text_seq):
            raise InstructDataError("graph_seq and text_seq lengths differ")
        types = {p.meta_type for p in self.graph_seq}
        if self.kind == "intra" and len(types) != 1:
            raise InstructDataError(f"intra entry spans {len(types)} meta types")
        if self.kind == "inter" and len(types) < 2:
            raise InstructDataError("inter entry must span >= 2 meta types")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "graph": [{"node": p.node_id, "type": p.meta_type} for p in self.graph_seq],
            "texts": [{"text": t, "type_text": tt} for t, tt in self.text_seq],
        }


@dataclass
class InstructionRecord:
    task_type: TaskType
    system_prompt: str
    graph_blocks: list[dict]
    input: str
    target: str

    def __post_init__(self):
        if not self.target:
            raise InstructDataError("target must be nonempty")

    def to_json_obj(self) -> dict:
        return {
            "task_type": self.task_type.value,
            "system": self.system_prompt,
            "graph_blocks": self.graph_blocks,
            "input": self.input,
            "target": self.target,
        }


def _grouped(pairs: list[TokenTextPair]) -> dict[str, list[TokenTextPair]]:
    groups: dict[str, list[TokenTextPair]] = {}
    for p in pairs:
        groups.setdefault(p.meta_type, []).append(p)
    return groups


def build_intra(
    pairs: list[TokenTextPair], seq_len: int, count: int, seed: int
) -> list[AlignmentEntry]:
    """Single-type alignment entries: L pairs of one uniformly chosen type.

    Only types with at least `seq_len` members are eligible; the graph-token
    order is a seeded shuffle and the text sequence matches it one-to-one.
    """
    groups = _grouped(pairs)
    eligible = sorted(t for t, members in groups.items() if len(members) >= seq_len)
    if not eligible:
        raise NoEligibleType(f"no meta type has >= {seq_len} pairs")
    rng = random.Random(seed)
    entries = []
    for _ in range(count):
        meta_type = rng.choice(eligible)
        sample = rng.sample(groups[meta_type], seq_len)
        rng.shuffle(sample)
        entries.append(
            AlignmentEntry(
                kind="intra",
                graph_seq=sample,
                text_seq=[(p.text, p.type_text) for p in sample],
            )
        )
    return entries


def build_inter(
    pairs: list[TokenTextPair], seq_len: int, count: int, seed: int
) -> list[AlignmentEntry]:
    """Cross-type alignment entries: L pairs spanning at least two meta types.

    Draws are rejection-sampled (bounded) until the diversity constraint
    holds; the text sequence carries both the text and the type text.
    """
    groups = _grouped(pairs)
    if len(groups) < 2:
        raise CannotSatisfyDiversity("pairs span fewer than 2 meta types")
    if len(pairs) < seq_len:
        raise CannotSatisfyDiversity(f"need >= {seq_len} pairs, have {len(pairs)}")
    rng = random.Random(seed)
    entries = []
    for _ in range(count):
        for _attempt in range(INTER_MAX_RETRIES):
            sample = rng.sample(pairs, seq_len)
            if len({p.meta_type for p in sample}) >= 2:
                break
        else:
            raise CannotSatisfyDiversity(
                f"could not draw a >=2-type sample in {INTER_MAX_RETRIES} tries"
            )
        rng.shuffle(sample)
        entries.append(
            AlignmentEntry(
                kind="inter",
                graph_seq=sample,
                text_seq=[(p.text, p.type_text) for p in sample],
            )
        )
    return entries


def build_multitask(
    examples: list[tuple[TaskType, list[dict], str, str]],
    templates,
) -> list[InstructionRecord]:
    """Instruction records with task-distinguishing system prompts.

    `examples` rows are (task_type, graph_blocks, input, target); predictive
    targets must carry both an answer and a reasoning segment.
    """
    from .action import build_system_prompt  # deferred: avoids import cycle
    from .hetgraph import HeteroGraph
    from .tokenizer import GraphTokenSequence

    empty_graph = HeteroGraph.build([], [])
    records = []
    for task_type, graph_blocks, input_text, target in examples:
        if not target:
            raise InstructDataError("target must be nonempty")
        if task_type in (TaskType.PREDICTIVE_PREDEFINED, TaskType.PREDICTIVE_WILD):
            if "Reasoning:" not in target:
                raise MissingReasoning(
                    f"predictive target lacks a reasoning segment: {target[:80]!r}"
                )
        # A placeholder empty token sequence: the record's own graph_blocks
        # carry the real token references.
        seq = GraphTokenSequence(center="", tokens=[], fanout=0, hops=0, seed=0)
        if task_type is TaskType.PREDICTIVE_PREDEFINED:
            graphs = [(empty_graph, seq), (empty_graph, seq)]
        else:
            graphs = [(empty_graph, seq)]
        bundle = build_system_prompt(task_type, "", input_text[:200], graphs, templates)
        records.append(
            InstructionRecord(
                task_type=task_type,
                system_prompt=bundle.system_prompt,
                graph_blocks=graph_blocks,
                input=input_text,
                target=target,
            )
        )
    return records


def allocate_counts(ratios: tuple[int, int, int], total: int) -> tuple[int, int, int]:
    """Largest-remainder allocation of `total` over percentage ratios."""
    exact = [r * total / 100 for r in ratios]
    floors = [int(x) for x in exact]
    shortfall = total - sum(floors)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(exact[i] - floors[i]), i)
    )
    for i in remainders[:shortfall]:
        floors[i] += 1
    return tuple(floors)


def _sample_category(rng: random.Random, source: list, n: int, name: str) -> list:
    if n == 0:
        return []
    if not source:
        raise EmptySource(f"category {name!r} is empty but has a nonzero ratio")
    if len(source) >= n:
        return rng.sample(source, n)
    logger.warning(
        "category %r has %d records for a quota of %d; sampling with replacement",
        name, len(source), n,
    )
    return [rng.choice(source) for _ in range(n)]


def emit_epoch(
    align: list[AlignmentEntry],
    pred: list[InstructionRecord],
    gen: list[InstructionRecord],
    epoch: int,
    epoch_size: int,
    seed: int,
    path: str | Path,
) -> Path:
    """Write one curriculum shard: a header line plus epoch_size record lines."""
    ratios = curriculum_ratios(epoch)
    counts = allocate_counts(ratios, epoch_size)
    rng = random.Random(f"{seed}:{epoch}")
    chosen: list[dict] = []
    for records, n, name in (
        (align, counts[0], "alignment"),
        (pred, counts[1], "predictive"),
        (gen, counts[2], "generative"),
    ):
        chosen.extend(r.to_json_obj() for r in _sample_category(rng, records, n, name))
    rng.shuffle(chosen)

    def digest(records) -> str:
        blob = json.dumps([r.to_json_obj() for r in records], sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    header = {
        "_meta": {
            "epoch": epoch,
            "seed": seed,
            "ratios": list(ratios),
            "counts": list(counts),
            "digests": {
                "alignment": digest(align),
                "predictive": digest(pred),
                "generative": digest(gen),
            },
        }
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for obj in chosen:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


@dataclass
class Shard:
    meta: dict
    alignment_lines: list[dict] = field(default_factory=list)
    instruction_lines: list[dict] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.alignment_lines) + len(self.instruction_lines)


def parse_shard(path: str | Path) -> Shard:
    """Re-parse an emitted shard; raises on any malformed line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InstructDataError("shard file is empty")
    header = json.loads(lines[0])
    if "_meta" not in header:
        raise InstructDataError("shard is missing its _meta header line")
    shard = Shard(meta=header["_meta"])
    for i, line in enumerate(lines[1:], start=2):
        obj = json.loads(line)
        if "kind" in obj:
            for key in ("graph", "texts"):
                if key not in obj:
                    raise InstructDataError(f"line {i}: alignment line lacks {key!r}")
            shard.alignment_lines.append(obj)
        elif "task_type" in obj:
            for key in ("system", "graph_blocks", "input", "target"):
                if key not in obj:
                    raise InstructDataError(f"line {i}: instruction line lacks {key!r}")
            shard.instruction_lines.append(obj)
        else:
            raise InstructDataError(f"line {i}: unrecognized record shape")
    return shard
