"""Token-level technical evaluation: align predicted spans with gold
annotations and roll counts up into per-category precision / recall / F1 with
macro and weighted averages.

Scoring is at word-token granularity; punctuation tokens carry no label and
are excluded. The 0/0 convention for every metric is 0.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..model import AnnotatedDocument, EntityLabel
from ..tokenize import word_tokens


class TextMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class BadFractions(ValueError):
    pass


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class LabelScores:
    tp: int
    fp: int
    fn: int
    support: int

    @property
    def precision(self) -> float:
        return _safe_div(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _safe_div(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return _safe_div(2 * p * r, p + r)


@dataclass(frozen=True)
class Averages:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ConfusionReport:
    per_label: dict[EntityLabel, LabelScores]
    accuracy: float
    macro: Averages
    weighted: Averages
    total_tokens: int


def _token_labels(doc: AnnotatedDocument) -> list[EntityLabel]:
    """Label of the span covering each word token's start offset, else NONE."""
    labels = []
    spans = sorted(doc.spans, key=lambda s: s.start)
    i = 0
    for token in word_tokens(doc.text):
        while i < len(spans) and spans[i].end <= token.start:
            i += 1
        if i < len(spans) and spans[i].start <= token.start < spans[i].end:
            labels.append(spans[i].label)
        else:
            labels.append(EntityLabel.NONE)
    return labels


def align_tokens(
    gold: AnnotatedDocument, pred: AnnotatedDocument
) -> list[tuple[EntityLabel, EntityLabel]]:
    """One (gold label, predicted label) pair per word token."""
    if gold.text != pred.text:
        raise TextMismatch(f"gold and predicted text differ for document {gold.id!r}")
    return list(zip(_token_labels(gold), _token_labels(pred)))


def align_corpus(
    gold_docs: Sequence[AnnotatedDocument], pred_docs: Sequence[AnnotatedDocument]
) -> list[tuple[EntityLabel, EntityLabel]]:
    pred_by_id = {doc.id: doc for doc in pred_docs}
    pairs: list[tuple[EntityLabel, EntityLabel]] = []
    for gold in gold_docs:
        if gold.id not in pred_by_id:
            raise TextMismatch(f"no prediction for document {gold.id!r}")
        pairs.extend(align_tokens(gold, pred_by_id[gold.id]))
    return pairs


def score(pairs: Iterable[tuple[EntityLabel, EntityLabel]]) -> ConfusionReport:
    """Aggregate aligned pairs into a confusion report.

    Macro averages weigh each category equally irrespective of support;
    weighted averages weigh each category by its support.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no token pairs to score")
    tp: dict[EntityLabel, int] = {}
    fp: dict[EntityLabel, int] = {}
    fn: dict[EntityLabel, int] = {}
    support: dict[EntityLabel, int] = {}
    correct = 0
    for gold, pred in pairs:
        support[gold] = support.get(gold, 0) + 1
        if gold is pred:
            tp[gold] = tp.get(gold, 0) + 1
            correct += 1
        else:
            fn[gold] = fn.get(gold, 0) + 1
            fp[pred] = fp.get(pred, 0) + 1
    labels = sorted(set(support) | set(fp), key=lambda l: l.value)
    per_label = {
        label: LabelScores(
            tp=tp.get(label, 0), fp=fp.get(label, 0), fn=fn.get(label, 0),
            support=support.get(label, 0),
        )
        for label in labels
    }
    # Fixed summation order keeps the report independent of pair order.
    ordered = [per_label[label] for label in labels]
    n_labels = len(ordered)
    total = len(pairs)
    macro = Averages(
        precision=_safe_div(sum(s.precision for s in ordered), n_labels),
        recall=_safe_div(sum(s.recall for s in ordered), n_labels),
        f1=_safe_div(sum(s.f1 for s in ordered), n_labels),
    )
    weighted = Averages(
        precision=_safe_div(sum(s.precision * s.support for s in ordered), total),
        recall=_safe_div(sum(s.recall * s.support for s in ordered), total),
        f1=_safe_div(sum(s.f1 * s.support for s in ordered), total),
    )
    return ConfusionReport(
        per_label=per_label,
        accuracy=correct / total,
        macro=macro,
        weighted=weighted,
        total_tokens=total,
    )


def _row_order(labels: Iterable[EntityLabel]) -> list[EntityLabel]:
    """Alphabetical, with OTHER_IDENTIFYING_ATTRIBUTE and NONE closing the table."""
    tail = [EntityLabel.OTHER_IDENTIFYING_ATTRIBUTE, EntityLabel.NONE]
    head = sorted((l for l in labels if l not in tail), key=lambda l: l.value)
    return head + [l for l in tail if l in labels]


def format_report(report: ConfusionReport) -> str:
    width = max(len(l.value) for l in report.per_label) if report.per_label else 10
    lines = [f"{'Entity tag':<{width}}  Precision  Recall  F1-score  Support"]
    for label in _row_order(report.per_label):
        s = report.per_label[label]
        lines.append(
            f"{label.value:<{width}}  {s.precision:>9.2f}  {s.recall:>6.2f}"
            f"  {s.f1:>8.2f}  {s.support:>7d}"
        )
    lines.append("-" * len(lines[0]))
    lines.append(f"{'accuracy':<{width}}  {'':>9}  {'':>6}  {report.accuracy:>8.2f}  {report.total_tokens:>7d}")
    for name, avg in (("macro avg", report.macro), ("weighted avg", report.weighted)):
        lines.append(
            f"{name:<{width}}  {avg.precision:>9.2f}  {avg.recall:>6.2f}"
            f"  {avg.f1:>8.2f}  {report.total_tokens:>7d}"
        )
    lines.append("0/0-valued metrics are reported as 0.")
    return "\n".join(lines)


def report_to_csv(report: ConfusionReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["label", "precision", "recall", "f1", "support"])
    for label in _row_order(report.per_label):
        s = report.per_label[label]
        writer.writerow([label.value, repr(s.precision), repr(s.recall), repr(s.f1), s.support])
    writer.writerow(["accuracy", "", "", repr(report.accuracy), report.total_tokens])
    writer.writerow(["macro avg", repr(report.macro.precision), repr(report.macro.recall),
                     repr(report.macro.f1), report.total_tokens])
    writer.writerow(["weighted avg", repr(report.weighted.precision), repr(report.weighted.recall),
                     repr(report.weighted.f1), report.total_tokens])
    return buf.getvalue()


def span_strict_score(
    gold_docs: Sequence[AnnotatedDocument], pred_docs: Sequence[AnnotatedDocument]
) -> dict[EntityLabel, LabelScores]:
    """Span-level exact-match scores (start, end and label all equal).

    Secondary output: stricter than the token-level report above and not
    comparable with it.
    """
    pred_by_id = {doc.id: doc for doc in pred_docs}
    tp: dict[EntityLabel, int] = {}
    fp: dict[EntityLabel, int] = {}
    fn: dict[EntityLabel, int] = {}
    support: dict[EntityLabel, int] = {}
    for gold in gold_docs:
        pred = pred_by_id.get(gold.id)
        if pred is None:
            raise TextMismatch(f"no prediction for document {gold.id!r}")
        gold_set = {(s.start, s.end, s.label) for s in gold.spans}
        pred_set = {(s.start, s.end, s.label) for s in pred.spans}
        for _, _, label in gold_set:
            support[label] = support.get(label, 0) + 1
        for item in gold_set & pred_set:
            tp[item[2]] = tp.get(item[2], 0) + 1
        for item in gold_set - pred_set:
            fn[item[2]] = fn.get(item[2], 0) + 1
        for item in pred_set - gold_set:
            fp[item[2]] = fp.get(item[2], 0) + 1
    labels = set(support) | set(fp)
    return {
        label: LabelScores(tp.get(label, 0), fp.get(label, 0), fn.get(label, 0),
                           support.get(label, 0))
        for label in labels
    }


def split_corpus(
    corpus: Sequence, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> tuple[list, list, list]:
    """Disjoint, exhaustive, seeded-shuffle (train, validation, test) split.

    Validation and test sizes are floors of their fractions; the remainder
    goes to train.
    """
    if len(fractions) != 3:
        raise BadFractions(f"expected 3 fractions, got {len(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"fractions sum to {sum(fractions)!r}, not 1")
    if any(f < 0 for f in fractions):
        raise BadFractions("fractions must be non-negative")
    items = list(corpus)
    rng = random.Random(seed)
    rng.shuffle(items)
    n = len(items)
    n_val = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_val - n_test
    return items[:n_train], items[n_train : n_train + n_val], items[n_train + n_val :]
