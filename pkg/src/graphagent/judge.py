"""Pairwise quality judgment of two generations with position debiasing.

Each pair is judged twice, once in each order; agreeing verdicts decide the
winner and disagreement falls back to a tie.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnparseableVerdict
from .gateway import BackendHandle, ChatRequest, chat
from .prompts import TemplateLibrary


@dataclass(frozen=True)
class JudgeVerdict:
    winner: str  # "A" | "B" | "tie"
    rationale: str

    def __post_init__(self):
        if self.winner not in ("A", "B", "tie"):
            raise ValueError(f"invalid winner {self.winner!r}")
        if not self.rationale:
            raise ValueError("rationale must be nonempty")


def render_judge_prompt(templates: TemplateLibrary, topic: str, a: str, b: str) -> str:
    return templates.section("judge").format(topic=topic, content_a=a, content_b=b)


def parse_verdict(content: str) -> str:
    """Scan for the three sanctioned verdict phrases; earliest match wins."""
    positions = {
        phrase: content.find(phrase)
        for phrase in ("A is better", "B is better", "On par")
    }
    found = {p: i for p, i in positions.items() if i >= 0}
    if not found:
        raise UnparseableVerdict(f"no verdict phrase in reply: {content[:120]!r}")
    phrase = min(found, key=found.get)
    return {"A is better": "A", "B is better": "B", "On par": "tie"}[phrase]


def _single_judgment(
    templates: TemplateLibrary, topic: str, first: str, second: str,
    backend: BackendHandle, seed: int,
) -> tuple[str, str]:
    prompt = render_judge_prompt(templates, topic, first, second)
    request = ChatRequest(
        system_prompt=prompt,
        messages=(("user", "Judge the two paragraphs now."),),
        seed=seed,
    )
    response = chat(request, backend)
    return parse_verdict(response.content), response.content


def judge_pair(
    topic: str,
    a: str,
    b: str,
    backend: BackendHandle,
    templates: TemplateLibrary,
    *,
    seed: int = 0,
) -> JudgeVerdict:
    """Judge (a, b) in both orders and reconcile.

    In the swapped call "A is better" refers to `b`; verdicts are mapped back
    before comparison.  Agreement yields the winner, disagreement a tie.
    """
    if not a or not b:
        raise ValueError("both paragraphs must be nonempty")
    verdict_fwd, raw_fwd = _single_judgment(templates, topic, a, b, backend, seed)
    verdict_rev, raw_rev = _single_judgment(templates, topic, b, a, backend, seed)
    mapped_rev = {"A": "B", "B": "A", "tie": "tie"}[verdict_rev]
    if verdict_fwd == mapped_rev:
        winner = verdict_fwd
        rationale = raw_fwd
    else:
        winner = "tie"
        rationale = (
            "Verdicts disagreed across the position swap; reconciled to a tie. "
            f"Forward: {raw_fwd} | Reversed: {raw_rev}"
        )
    return JudgeVerdict(winner=winner, rationale=rationale)
