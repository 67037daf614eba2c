"""Command-line entry point: the full pipeline plus each stage standalone.

Exit codes are a stable scripting contract: 0 success, 2 plan error, 3
grounding error, 4 SKG error, 5 tokenize error, 6 action error, 7 eval error.
Every flag can also be set through a ``GRAPHAGENT_``-prefixed environment
variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import instruct
from .errors import GraphAgentError
from .hetgraph import HeteroGraph, ground_graph
from .judge import judge_pair
from .metrics import LabeledPredictions, aggregate_ppl, auc, macro_f1, micro_f1
from .pipeline import (
    EXIT_CODES,
    RunConfig,
    StageError,
    make_backend,
    make_provider,
    make_templates,
    run,
)
from .planner import TaskType, parse_intent
from .report import EvalReport
from .skg import build_skg
from .tokenizer import embed_graph_texts, encode_graph, sample_subgraph


def _fail(stage: str, exc: Exception) -> None:
    click.echo(f"error [{stage}]: {exc}", err=True)
    sys.exit(EXIT_CODES[stage])


_CONFIG_OPTIONS = [
    click.option("--backend", type=click.Choice(["mock", "http"]), default="mock", show_default=True),
    click.option("--endpoint", default="", help="Chat/embed service URL (http backend)."),
    click.option("--iterations", type=int, default=2, show_default=True),
    click.option("--fanout", type=int, default=10, show_default=True),
    click.option("--hops", type=int, default=2, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option(
        "--render-mode",
        type=click.Choice(["text_degrade", "embedding_passthrough"]),
        default="text_degrade",
        show_default=True,
    ),
    click.option("--template-dir", default="", help="Override the built-in prompt templates."),
    click.option("--hash-dim", type=int, default=64, show_default=True),
    click.option("--script-path", default="", help="Canned-completion script for the mock backend."),
]


def _with_config(fn):
    for option in reversed(_CONFIG_OPTIONS):
        fn = option(fn)
    return fn


def _build_config(kwargs: dict) -> RunConfig:
    fields = (
        "backend", "endpoint", "iterations", "fanout", "hops", "seed",
        "render_mode", "template_dir", "hash_dim", "script_path",
    )
    return RunConfig(**{f: kwargs.pop(f) for f in fields})


@click.group()
def main():
    """Graph-language agent pipeline: plan, ground, build, tokenize, act."""


@main.command("run")
@click.argument("query")
@click.option("--files", multiple=True, type=click.Path(exists=True), help="Node file then edge file.")
@click.option("--run-dir", required=True, type=click.Path(), help="Artifact output directory.")
@_with_config
def run_cmd(query, files, run_dir, **kwargs):
    """Execute the full pipeline for one query."""
    config = _build_config(kwargs)
    try:
        result = run(query, [str(f) for f in files], config, run_dir)
    except StageError as exc:
        click.echo(f"error [{exc.stage}]: {exc.cause}", err=True)
        sys.exit(EXIT_CODES[exc.stage])
    click.echo(json.dumps(result.result.to_json_obj(), ensure_ascii=False))


@main.command("plan")
@click.argument("query")
@click.option("--files", multiple=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="plan.json", show_default=True)
@_with_config
def plan_cmd(query, files, out, **kwargs):
    """Parse a query into a task plan."""
    config = _build_config(kwargs)
    try:
        plan = parse_intent(
            query, [str(f) for f in files], make_backend(config),
            make_templates(config), seed=config.seed,
        )
    except GraphAgentError as exc:
        _fail("plan", exc)
    plan.save(out)
    click.echo(f"wrote {out} ({plan.task_type.value})")


@main.command("ground")
@click.argument("node_file", type=click.Path(exists=True))
@click.argument("edge_file", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="graph.json", show_default=True)
def ground_cmd(node_file, edge_file, out):
    """Ground node/edge listing files into a validated graph."""
    try:
        graph = ground_graph(
            Path(node_file).read_text(encoding="utf-8").splitlines(),
            Path(edge_file).read_text(encoding="utf-8").splitlines(),
        )
    except GraphAgentError as exc:
        _fail("ground", exc)
    Path(out).write_text(graph.serialize(), encoding="utf-8")
    click.echo(f"wrote {out} ({len(graph)} nodes, {len(graph.edges)} edges)")


@main.command("skg")
@click.argument("text_file", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="skg.json", show_default=True)
@_with_config
def skg_cmd(text_file, out, **kwargs):
    """Build a semantic knowledge graph from a text file."""
    config = _build_config(kwargs)
    try:
        skg = build_skg(
            Path(text_file).read_text(encoding="utf-8"),
            config.iterations, make_backend(config), make_templates(config),
            seed=config.seed,
        )
    except GraphAgentError as exc:
        _fail("skg", exc)
    skg.save(out)
    click.echo(f"wrote {out} ({len(skg.nodes)} nodes over {len(skg.layers)} layers)")


@main.command("tokenize")
@click.argument("graph_file", type=click.Path(exists=True))
@click.option("--center", required=True, help="Center node id for sampling.")
@click.option("--out", type=click.Path(), default="tokens.json", show_default=True)
@_with_config
def tokenize_cmd(graph_file, center, out, **kwargs):
    """Encode a grounded graph and sample tokens around a center node."""
    config = _build_config(kwargs)
    try:
        graph = HeteroGraph.parse(Path(graph_file).read_text(encoding="utf-8"))
        text_emb, type_emb = embed_graph_texts(graph, make_provider(config))
        encoded = encode_graph(graph, text_emb, type_emb, config.propagation_layers)
        seq = sample_subgraph(
            graph, encoded, center,
            fanout=config.fanout, hops=config.hops, seed=config.seed,
        )
    except GraphAgentError as exc:
        _fail("tokenize", exc)
    Path(out).write_text(seq.serialize(), encoding="utf-8")
    click.echo(f"wrote {out} ({len(seq.tokens)} tokens)")


def _load_pairs(path: str) -> list[instruct.TokenTextPair]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        instruct.TokenTextPair(r["node"], r["type"], r["text"], r["type_text"])
        for r in rows
    ]


@main.command("build-align")
@click.argument("pairs_file", type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["intra", "inter"]), required=True)
@click.option("--seq-len", type=int, default=instruct.DEFAULT_SEQ_LEN, show_default=True)
@click.option("--count", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="align.jsonl", show_default=True)
def build_align_cmd(pairs_file, kind, seq_len, count, seed, out):
    """Build graph-text alignment entries from a token/text pair pool."""
    try:
        pairs = _load_pairs(pairs_file)
        builder = instruct.build_intra if kind == "intra" else instruct.build_inter
        entries = builder(pairs, seq_len, count, seed)
    except (GraphAgentError, KeyError, json.JSONDecodeError) as exc:
        _fail("eval", exc)
    with open(out, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_json_obj(), ensure_ascii=False) + "\n")
    click.echo(f"wrote {out} ({len(entries)} {kind} entries)")


def _load_alignment_entries(path: str) -> list[instruct.AlignmentEntry]:
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        pairs = [
            instruct.TokenTextPair(g["node"], g["type"], t["text"], t["type_text"])
            for g, t in zip(obj["graph"], obj["texts"])
        ]
        entries.append(
            instruct.AlignmentEntry(
                kind=obj["kind"],
                graph_seq=pairs,
                text_seq=[(t["text"], t["type_text"]) for t in obj["texts"]],
            )
        )
    return entries


def _load_instruction_records(path: str) -> list[instruct.InstructionRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        records.append(
            instruct.InstructionRecord(
                task_type=TaskType(obj["task_type"]),
                system_prompt=obj["system"],
                graph_blocks=obj["graph_blocks"],
                input=obj["input"],
                target=obj["target"],
            )
        )
    return records


@main.command("build-epoch")
@click.option("--align", "align_file", type=click.Path(exists=True), default=None)
@click.option("--pred", "pred_file", type=click.Path(exists=True), default=None)
@click.option("--gen", "gen_file", type=click.Path(exists=True), default=None)
@click.option("--epoch", type=int, required=True)
@click.option("--size", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default="epoch.jsonl", show_default=True)
def build_epoch_cmd(align_file, pred_file, gen_file, epoch, size, seed, out):
    """Emit one curriculum-mixed training shard."""
    try:
        align = _load_alignment_entries(align_file) if align_file else []
        pred = _load_instruction_records(pred_file) if pred_file else []
        gen = _load_instruction_records(gen_file) if gen_file else []
        instruct.emit_epoch(align, pred, gen, epoch, size, seed, out)
    except (GraphAgentError, ValueError, KeyError) as exc:
        _fail("eval", exc)
    click.echo(f"wrote {out} (epoch {epoch}, {size} records)")


@main.command("eval")
@click.argument("predictions_file", type=click.Path(exists=True))
@click.option("--ppl-file", type=click.Path(exists=True), default=None,
              help='JSON {"values": [...], "scorer_id": "..."}.')
@click.option("--judge-file", type=click.Path(exists=True), default=None,
              help='JSON {"wins_a": n, "wins_b": n, "ties": n}.')
@click.option("--out", type=click.Path(), default="report.json", show_default=True)
@click.option("--figure", type=click.Path(), default=None,
              help="Figure output path (defaults to the report path with .png).")
def eval_cmd(predictions_file, ppl_file, judge_file, out, figure):
    """Score predictions and write the report, table and figure."""
    try:
        obj = json.loads(Path(predictions_file).read_text(encoding="utf-8"))
        preds = LabeledPredictions(
            label_set=tuple(obj["label_set"]),
            items=[(y, y_hat, scores) for y, y_hat, scores in obj["items"]],
        )
        metrics = {"micro_f1": micro_f1(preds), "macro_f1": macro_f1(preds)}
        if all(scores is not None for _y, _p, scores in preds.items):
            metrics["auc"] = auc(preds)
        report = EvalReport(metrics=metrics)
        if ppl_file:
            ppl_obj = json.loads(Path(ppl_file).read_text(encoding="utf-8"))
            report.ppl = aggregate_ppl(
                ppl_obj["values"], ppl_obj.get("scorer_id", "external")
            )
        if judge_file:
            report.judge = json.loads(Path(judge_file).read_text(encoding="utf-8"))
        report.save(out)
        figure = figure or str(Path(out).with_suffix(".png"))
        report.render_figure(figure)
    except (GraphAgentError, ValueError, KeyError) as exc:
        _fail("eval", exc)
    click.echo(report.table())
    click.echo(f"wrote {out} and {figure}")


@main.command("judge")
@click.argument("file_a", type=click.Path(exists=True))
@click.argument("file_b", type=click.Path(exists=True))
@click.option("--topic", required=True)
@_with_config
def judge_cmd(file_a, file_b, topic, **kwargs):
    """Judge two generations pairwise with position debiasing."""
    config = _build_config(kwargs)
    try:
        verdict = judge_pair(
            topic,
            Path(file_a).read_text(encoding="utf-8"),
            Path(file_b).read_text(encoding="utf-8"),
            make_backend(config),
            make_templates(config),
            seed=config.seed,
        )
    except GraphAgentError as exc:
        _fail("eval", exc)
    click.echo(json.dumps({"winner": verdict.winner, "rationale": verdict.rationale},
                          ensure_ascii=False))


def entry_point():
    main(auto_envvar_prefix="GRAPHAGENT")


if __name__ == "__main__":
    entry_point()
