import pytest

from graphagent.errors import UnparseableVerdict
from graphagent.judge import judge_pair, parse_verdict, render_judge_prompt
from graphagent.mock import MockBackend, MockScript

from conftest import SequenceBackend


class TestParseVerdict:
    def test_sanctioned_phrases(self):
        assert parse_verdict("```A is better``` because ...") == "A"
        assert parse_verdict("```B is better```") == "B"
        assert parse_verdict("```On par``` both fine") == "tie"

    def test_earliest_phrase_wins(self):
        assert parse_verdict("A is better. Not B is better.") == "A"

    def test_unparseable(self):
        with pytest.raises(UnparseableVerdict):
            parse_verdict("no verdict at all")


class TestRenderPrompt:
    def test_contains_verbatim_criterion(self, templates):
        prompt = render_judge_prompt(templates, "Dense Passage Retrieval", "a", "b")
        assert "It should strictly cover all the references provided" in prompt
        assert "<Dense Passage Retrieval>" in prompt
        assert "A:<a>" in prompt and "B:<b>" in prompt


class TestJudgePair:
    def test_consistent_verdicts_pick_winner(self, templates):
        # Forward "A is better" + reversed "B is better" both point at `a`.
        backend = SequenceBackend(["A is better. Crisp.", "B is better. Crisp."])
        verdict = judge_pair("t", "para a", "para b", backend, templates)
        assert verdict.winner == "A"
        assert verdict.rationale == "A is better. Crisp."

    def test_disagreement_reconciled_to_tie(self, templates):
        backend = SequenceBackend(["A is better.", "A is better."])
        verdict = judge_pair("t", "para a", "para b", backend, templates)
        assert verdict.winner == "tie"
        assert "disagreed" in verdict.rationale

    def test_swap_symmetry(self, templates):
        # Same scripted single-order verdicts, swapped inputs -> mirrored winner.
        forward = judge_pair(
            "t", "x", "y", SequenceBackend(["A is better.", "B is better."]), templates
        )
        swapped = judge_pair(
            "t", "y", "x", SequenceBackend(["B is better.", "A is better."]), templates
        )
        assert forward.winner == "A" and swapped.winner == "B"

    def test_on_par_both_orders(self, templates):
        backend = SequenceBackend(["On par. Equivalent.", "On par. Equivalent."])
        assert judge_pair("t", "a", "b", backend, templates).winner == "tie"

    def test_empty_paragraph_rejected(self, templates):
        with pytest.raises(ValueError):
            judge_pair("t", "", "b", MockBackend(MockScript()), templates)
