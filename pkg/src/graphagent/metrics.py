"""Classification metrics and perplexity aggregation for the eval harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DegenerateClass, NonPositivePpl, UnknownLabel

logger = logging.getLogger(__name__)


@dataclass
class LabeledPredictions:
    """(true, predicted) label pairs with optional per-class score vectors."""

    label_set: tuple[str, ...]
    items: list[tuple[str, str, list[float] | None]] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.label_set)) != len(self.label_set):
            raise ValueError("label_set contains duplicates")
        for y, y_hat, scores in self.items:
            for label in (y, y_hat):
                if label not in self.label_set:
                    raise UnknownLabel(f"label {label!r} not in declared label set")
            if scores is not None and len(scores) != len(self.label_set):
                raise ValueError(
                    f"score vector of length {len(scores)} for {len(self.label_set)} classes"
                )

    def add(self, true_label: str, predicted_label: str, scores: list[float] | None = None):
        self.items.append((true_label, predicted_label, scores))
        self.__post_init__()


def _confusion(preds: LabeledPredictions) -> dict[str, tuple[int, int, int]]:
    """Per-class (tp, fp, fn)."""
    counts = {label: [0, 0, 0] for label in preds.label_set}
    for y, y_hat, _scores in preds.items:
        if y == y_hat:
            counts[y][0] += 1
        else:
            counts[y_hat][1] += 1
            counts[y][2] += 1
    return {label: tuple(c) for label, c in counts.items()}


def micro_f1(preds: LabeledPredictions) -> float:
    """Micro-averaged F1 over the declared label set.

    For single-label multiclass data this equals plain accuracy.
    """
    if not preds.items:
        raise ValueError("no predictions")
    confusion = _confusion(preds)
    tp = sum(c[0] for c in confusion.values())
    fp = sum(c[1] for c in confusion.values())
    fn = sum(c[2] for c in confusion.values())
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def macro_f1(preds: LabeledPredictions) -> float:
    """Unweighted mean of per-class F1; a class with no support scores 0."""
    if not preds.items:
        raise ValueError("no predictions")
    confusion = _confusion(preds)
    f1s = []
    for label in preds.label_set:
        tp, fp, fn = confusion[label]
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return sum(f1s) / len(f1s)


def _binary_auc(scores: list[float], positives: list[bool]) -> float:
    """Mann-Whitney rank statistic, ties counted one half."""
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    if not pos or not neg:
        raise DegenerateClass("need at least one positive and one negative example")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auc(preds: LabeledPredictions, positive_class: str | None = None) -> float:
    """ROC AUC from per-class scores.

    Binary (with `positive_class`): the Mann-Whitney statistic for that class'
    score column.  Multiclass: the unweighted mean of one-vs-rest AUCs over
    classes having both positives and negatives; degenerate classes are
    skipped with a warning, and all-degenerate input raises.
    """
    if not preds.items:
        raise ValueError("no predictions")
    if any(scores is None for _y, _p, scores in preds.items):
        raise ValueError("all items need score vectors for AUC")
    if positive_class is not None:
        if positive_class not in preds.label_set:
            raise UnknownLabel(f"positive class {positive_class!r} not declared")
        idx = preds.label_set.index(positive_class)
        return _binary_auc(
            [scores[idx] for _y, _p, scores in preds.items],
            [y == positive_class for y, _p, _s in preds.items],
        )
    per_class = []
    skipped = []
    for idx, label in enumerate(preds.label_set):
        try:
            per_class.append(
                _binary_auc(
                    [scores[idx] for _y, _p, scores in preds.items],
                    [y == label for y, _p, _s in preds.items],
                )
            )
        except DegenerateClass:
            skipped.append(label)
    if skipped:
        logger.warning("AUC skipped degenerate class(es): %s", ", ".join(skipped))
    if not per_class:
        raise DegenerateClass("every class lacks positives or negatives")
    return sum(per_class) / len(per_class)


@dataclass
class PplReport:
    per_sample: list[float]
    mean: float
    max: float
    scorer_id: str

    def to_json_obj(self) -> dict:
        return {"mean": self.mean, "max": self.max, "scorer_id": self.scorer_id}


def aggregate_ppl(per_sample: list[float], scorer_id: str = "external") -> PplReport:
    """Mean/max aggregation of externally computed per-sample perplexities."""
    if not per_sample:
        raise ValueError("no perplexity values")
    for v in per_sample:
        if not (v > 0.0) or v != v or v in (float("inf"),):
            raise NonPositivePpl(f"perplexity values must be finite and > 0, got {v!r}")
    return PplReport(
        per_sample=list(per_sample),
        mean=sum(per_sample) / len(per_sample),
        max=max(per_sample),
        scorer_id=scorer_id,
    )
