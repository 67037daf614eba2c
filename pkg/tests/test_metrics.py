import math
import random

import pytest
from hypothesis import given, strategies as st

from graphagent.errors import DegenerateClass, NonPositivePpl, UnknownLabel
from graphagent.metrics import (
    LabeledPredictions,
    aggregate_ppl,
    auc,
    macro_f1,
    micro_f1,
)


def preds_from(y, y_hat, labels=None, scores=None):
    labels = labels or tuple(sorted(set(y) | set(y_hat)))
    items = [
        (a, b, scores[i] if scores else None)
        for i, (a, b) in enumerate(zip(y, y_hat))
    ]
    return LabeledPredictions(label_set=tuple(labels), items=items)


def oracle_f1s(y, y_hat, labels):
    """Brute-force per-class F1 from first principles."""
    out = []
    for label in labels:
        tp = sum(1 for a, b in zip(y, y_hat) if a == label and b == label)
        fp = sum(1 for a, b in zip(y, y_hat) if a != label and b == label)
        fn = sum(1 for a, b in zip(y, y_hat) if a == label and b != label)
        out.append(2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return out


def oracle_micro(y, y_hat, labels):
    tp = sum(1 for a, b in zip(y, y_hat) if a == b)
    fp = sum(1 for a, b in zip(y, y_hat) if a != b)
    fn = fp
    return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0


def oracle_binary_auc(scores, positives):
    pairs = [
        (sp, sn)
        for sp, p in zip(scores, positives) if p
        for sn, n in zip(scores, positives) if not n
    ]
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a, b in pairs) / len(pairs)


class TestMicroF1:
    def test_all_correct(self):
        assert micro_f1(preds_from(["a", "b"], ["a", "b"])) == 1.0

    def test_pinned_fixture(self):
        # [DERIVED] confusion-matrix oracle: 3 of 4 correct.
        assert micro_f1(preds_from(list("0012"), list("0112"))) == pytest.approx(0.75, abs=1e-12)

    def test_total_miss(self):
        assert micro_f1(preds_from(["1", "1"], ["0", "0"])) == 0.0

    def test_unknown_label_rejected(self):
        with pytest.raises(UnknownLabel):
            preds_from(["a"], ["z"], labels=("a", "b"))


class TestMacroF1:
    def test_all_correct(self):
        assert macro_f1(preds_from(list("abc"), list("abc"))) == 1.0

    def test_pinned_fixture(self):
        # [DERIVED] per-class F1s 2/3, 2/3, 1 -> mean 7/9.
        assert macro_f1(preds_from(list("0012"), list("0112"))) == pytest.approx(7 / 9, abs=1e-12)

    def test_single_class(self):
        assert macro_f1(preds_from(["a", "a"], ["a", "a"])) == 1.0

    def test_declared_absent_class_contributes_zero(self):
        value = macro_f1(preds_from(["a", "a"], ["a", "a"], labels=("a", "b")))
        assert value == pytest.approx(0.5, abs=1e-12)


class TestAuc:
    def test_pinned_fixture(self):
        # [DERIVED] all-pairs rank oracle: 3 of 4 pairs correctly ordered.
        scores = [[0.9, 0.1], [0.6, 0.4], [0.65, 0.35], [0.2, 0.8]]
        preds = preds_from(list("0011"), list("0011"), labels=("0", "1"), scores=scores)
        assert auc(preds, positive_class="1") == pytest.approx(0.75, abs=1e-12)

    def test_perfect_separation(self):
        scores = [[1, 0], [0.9, 0.1], [0.1, 0.9], [0, 1]]
        preds = preds_from(list("0011"), list("0011"), labels=("0", "1"), scores=scores)
        assert auc(preds, positive_class="1") == 1.0

    def test_all_ties(self):
        scores = [[0.5, 0.5]] * 4
        preds = preds_from(list("0011"), list("0011"), labels=("0", "1"), scores=scores)
        assert auc(preds, positive_class="1") == 0.5

    def test_degenerate_class_skipped_with_warning(self, caplog):
        scores = [[0.2, 0.5, 0.3], [0.3, 0.3, 0.4], [0.1, 0.2, 0.7]]
        preds = preds_from(list("001"), list("001"), labels=("0", "1", "2"), scores=scores)
        with caplog.at_level("WARNING"):
            auc(preds)
        assert any("degenerate" in r.message for r in caplog.records)

    def test_all_degenerate_raises(self):
        preds = preds_from(["a"], ["a"], labels=("a",), scores=[[1.0]])
        with pytest.raises(DegenerateClass):
            auc(preds)

    def test_monotone_transform_invariance(self):
        rng = random.Random(5)
        raw = [[rng.random(), rng.random()] for _ in range(20)]
        y = [rng.choice("01") for _ in range(20)]
        a = auc(preds_from(y, y, labels=("0", "1"), scores=raw), positive_class="1")
        warped = [[math.exp(3 * s) for s in row] for row in raw]
        b = auc(preds_from(y, y, labels=("0", "1"), scores=warped), positive_class="1")
        assert a == pytest.approx(b, abs=1e-12)


class TestOracleAgreement:
    def test_random_instances_match_brute_force(self):
        # [DERIVED] brute-force oracles on random small instances.
        rng = random.Random(99)
        for _ in range(300):
            n_classes = rng.randint(2, 4)
            labels = tuple(str(c) for c in range(n_classes))
            n = rng.randint(2, 12)
            y = [rng.choice(labels) for _ in range(n)]
            y_hat = [rng.choice(labels) for _ in range(n)]
            preds = preds_from(y, y_hat, labels=labels)
            assert micro_f1(preds) == pytest.approx(oracle_micro(y, y_hat, labels), abs=1e-12)
            expected_macro = sum(oracle_f1s(y, y_hat, labels)) / n_classes
            assert macro_f1(preds) == pytest.approx(expected_macro, abs=1e-12)

    def test_binary_auc_matches_pair_oracle(self):
        rng = random.Random(4)
        for _ in range(200):
            n = rng.randint(2, 12)
            y = [rng.choice("01") for _ in range(n)]
            if len(set(y)) < 2:
                continue
            scores = [[1 - s, s] for s in (rng.random() for _ in range(n))]
            preds = preds_from(y, y, labels=("0", "1"), scores=scores)
            expected = oracle_binary_auc([s[1] for s in scores], [v == "1" for v in y])
            assert auc(preds, positive_class="1") == pytest.approx(expected, abs=1e-12)

    @given(st.lists(st.sampled_from("ab"), min_size=1, max_size=10),
           st.lists(st.sampled_from("ab"), min_size=1, max_size=10))
    def test_label_permutation_equivariance(self, y, y_hat):
        n = min(len(y), len(y_hat))
        y, y_hat = y[:n], y_hat[:n]
        swap = {"a": "b", "b": "a"}
        direct = preds_from(y, y_hat, labels=("a", "b"))
        swapped = preds_from([swap[v] for v in y], [swap[v] for v in y_hat], labels=("a", "b"))
        assert micro_f1(direct) == pytest.approx(micro_f1(swapped), abs=1e-12)
        assert macro_f1(direct) == pytest.approx(macro_f1(swapped), abs=1e-12)


class TestPpl:
    def test_trivial_arithmetic(self):
        report = aggregate_ppl([2.0, 4.0], scorer_id="s")
        assert (report.mean, report.max) == (3.0, 4.0)

    def test_single_value(self):
        report = aggregate_ppl([5.1])
        assert report.mean == report.max == 5.1

    def test_random_matches_single_pass_reference(self):
        # [DERIVED] independent single-pass mean/max computation.
        rng = random.Random(31)
        values = [rng.uniform(1.0, 50.0) for _ in range(100)]
        total, biggest = 0.0, float("-inf")
        for v in values:
            total += v
            biggest = max(biggest, v)
        report = aggregate_ppl(values)
        assert report.mean == pytest.approx(total / 100, abs=1e-12)
        assert report.max == biggest

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_nonpositive_rejected(self, bad):
        with pytest.raises(NonPositivePpl):
            aggregate_ppl([2.0, bad])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_ppl([])
