"""Classification and entity metrics, and site-disjoint patient splits."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, TooFewSites
from .lesion_ner import label_runs
from .rules import CancerStatus

CLASSES = tuple(CancerStatus)


def _status(v) -> int:
    if isinstance(v, str):
        return int(CancerStatus[v])
    return int(CancerStatus(v))


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def _f1(p: float, r: float) -> float:
    return _safe_div(2 * p * r, p + r)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = truth, columns = prediction

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cell(self, true, pred) -> int:
        return int(self.counts[_status(true), _status(pred)])

    def to_json(self) -> dict:
        return {"labels": [c.name for c in CLASSES], "counts": self.counts.tolist()}


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    per_class: dict[str, ClassScores]
    macro_f1: float
    confusion: ConfusionMatrix

    def to_json(self) -> dict:
        return {
            "per_class": {k: asdict(v) for k, v in self.per_class.items()},
            "macro_f1": self.macro_f1,
            "confusion_matrix": self.confusion.to_json(),
        }


@dataclass
class NerReport:
    tp: int
    tpp: int
    tgp: int
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return asdict(self)


def confusion_matrix(y_true: Sequence, y_pred: Sequence) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true labels but {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise LengthMismatch("cannot build a confusion matrix from zero samples")
    counts = np.zeros((len(CLASSES), len(CLASSES)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[_status(t), _status(p)] += 1
    return ConfusionMatrix(counts)


def classification_report(cm: ConfusionMatrix) -> EvalReport:
    """Per-class precision/recall/F1 (0/0 taken as 0) and their unweighted mean."""
    c = cm.counts
    per_class = {}
    for k, cls in enumerate(CLASSES):
        tp = float(c[k, k])
        precision = _safe_div(tp, float(c[:, k].sum()))
        recall = _safe_div(tp, float(c[k, :].sum()))
        per_class[cls.name] = ClassScores(precision, recall, _f1(precision, recall), int(c[k, :].sum()))
    macro = sum(s.f1 for s in per_class.values()) / len(CLASSES)
    return EvalReport(per_class, macro, cm)


def ner_report(true_labels: Sequence[Sequence[int]], pred_labels: Sequence[Sequence[int]]) -> NerReport:
    """Entity-level scores where only exact (start, end) matches count."""
    if len(true_labels) != len(pred_labels):
        raise LengthMismatch(f"{len(true_labels)} gold documents but {len(pred_labels)} predicted")
    tp = tpp = tgp = 0
    for k, (gold, pred) in enumerate(zip(true_labels, pred_labels)):
        if len(gold) != len(pred):
            raise LengthMismatch(f"document {k}: {len(gold)} gold labels but {len(pred)} predicted")
        gold_spans = set(label_runs(gold))
        pred_spans = set(label_runs(pred))
        tgp += len(gold_spans)
        tpp += len(pred_spans)
        tp += len(gold_spans & pred_spans)
    precision = _safe_div(tp, tpp)
    recall = _safe_div(tp, tgp)
    return NerReport(tp, tpp, tgp, precision, recall, _f1(precision, recall))


def render_table(report: EvalReport, title: str = "model") -> str:
    """Text table with one F1 column per class and the macro average."""
    heads = [f"{name} F1 (n={s.support})" for name, s in report.per_class.items()] + ["Macro-F1"]
    cells = [f"{s.f1:.3f}" for s in report.per_class.values()] + [f"{report.macro_f1:.3f}"]
    first = max(len("Model"), len(title))
    widths = [max(len(h), len(c)) for h, c in zip(heads, cells)]
    line1 = "Model".ljust(first) + "  " + "  ".join(h.rjust(w) for h, w in zip(heads, widths))
    line2 = title.ljust(first) + "  " + "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    rule = "-" * len(line1)
    return "\n".join([rule, line1, rule, line2, rule])


# ---------------------------------------------------------------------------
# Splits


def split_by_site(
    patients: Sequence,
    test_fraction: float = 0.3,
    seed: int = 0,
    tolerance: float = 0.10,
):
    """Assign whole collection sites to the test side until it is large enough.

    Sites are visited in a seeded random order. At each step the first site
    whose addition keeps every class share of the test side within
    ``tolerance`` (absolute) of the global share is taken; when none does,
    the site with the smallest worst-case deviation is taken. The last
    remaining site always stays in training. Returns ``(train, test)``,
    each preserving input order.
    """
    by_site: dict[str, list[int]] = {}
    for i, p in enumerate(patients):
        by_site.setdefault(p.site_id, []).append(i)
    if len(by_site) < 2:
        raise TooFewSites(f"need at least 2 sites, got {len(by_site)}")
    labels = [p.label for p in patients]
    classes = sorted({l for l in labels if l is not None})
    global_counts = Counter(labels)
    n = len(patients)
    global_share = {c: global_counts[c] / n for c in classes}
    site_counts = {s: Counter(labels[i] for i in rows) for s, rows in by_site.items()}

    rng = np.random.default_rng(seed)
    order = [sorted(by_site)[k] for k in rng.permutation(len(by_site))]
    target = test_fraction * n
    test_sites: list[str] = []
    test_counts: Counter = Counter()
    test_n = 0

    def deviation(site: str) -> float:
        counts = test_counts + site_counts[site]
        size = test_n + len(by_site[site])
        if not classes:
            return 0.0
        return max(abs(counts[c] / size - global_share[c]) for c in classes)

    remaining = list(order)
    while test_n < target and len(remaining) > 1:
        pick = next((s for s in remaining if deviation(s) <= tolerance), None)
        if pick is None:
            pick = min(remaining, key=deviation)
        remaining.remove(pick)
        test_sites.append(pick)
        test_counts += site_counts[pick]
        test_n += len(by_site[pick])

    chosen = set(test_sites)
    train = [p for p in patients if p.site_id not in chosen]
    test = [p for p in patients if p.site_id in chosen]
    return train, test


def stratified_split(items: Sequence, labels: Sequence, fraction: float, seed: int = 0):
    """Per-label seeded split; returns ``(kept, held_out)`` index lists in input order."""
    rng = np.random.default_rng(seed)
    held: set[int] = set()
    by_label: dict = {}
    for i, l in enumerate(labels):
        by_label.setdefault(l, []).append(i)
    for l in sorted(by_label, key=str):
        rows = by_label[l]
        k = int(round(fraction * len(rows)))
        if len(rows) > 1:
            k = min(max(k, 1), len(rows) - 1)
        else:
            k = 0
        held.update(rows[j] for j in rng.permutation(len(rows))[:k])
    kept = [i for i in range(len(items)) if i not in held]
    return kept, sorted(held)
