"""Confusion matrices, one-vs-rest counts, and accuracy/precision/recall/F1 reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .signal import REPORT_ORDER, FaultClass

N_CLASSES = len(FaultClass)


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


def _ratio(num, den):
    return num / den if den else 0.0


def accuracy(b: BinaryCounts) -> float:
    return _ratio(b.tp + b.tn, b.total)


def precision(b: BinaryCounts) -> float:
    return _ratio(b.tp, b.tp + b.fp)


def recall(b: BinaryCounts) -> float:
    return _ratio(b.tp, b.tp + b.fn)


def f1_from(p: float, r: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0)."""
    return _ratio(2.0 * p * r, p + r)


def f1(b: BinaryCounts) -> float:
    return f1_from(precision(b), recall(b))


def confusion(preds: Sequence[int], labels: Sequence[int], n_classes: int = N_CLASSES) -> np.ndarray:
    """Count matrix indexed ``[true][predicted]``."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if preds.size == 0:
        raise ValueError("no examples to tally")
    for arr in (preds, labels):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"class indices must lie in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def one_vs_rest(cm, c: int) -> BinaryCounts:
    cm = np.asarray(cm)
    if not 0 <= c < cm.shape[0]:
        raise ValueError(f"class {c} out of range")
    tp = int(cm[c, c])
    fn = int(cm[c].sum()) - tp
    fp = int(cm[:, c].sum()) - tp
    return BinaryCounts(tp, int(cm.sum()) - tp - fn - fp, fp, fn)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class Report:
    model: str
    accuracy: float
    per_class: Dict[FaultClass, ClassMetrics]
    confusion: np.ndarray
    macro_precision: float = 0.0
    macro_recall: float = 0.0
    macro_f1: float = 0.0

    def to_dict(self):
        return {
            "model": self.model,
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "per_class": {
                c.title: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for c, m in self.per_class.items()
            },
            "confusion": self.confusion.tolist(),
            "class_order": [c.title for c in FaultClass],
        }

    @classmethod
    def from_dict(cls, d):
        per_class = {
            FaultClass.parse(name): ClassMetrics(v["precision"], v["recall"], v["f1"], v["support"])
            for name, v in d["per_class"].items()
        }
        return cls(
            d["model"], d["accuracy"], per_class, np.array(d["confusion"], dtype=np.int64),
            d["macro"]["precision"], d["macro"]["recall"], d["macro"]["f1"],
        )


def build_report(cm, model: str) -> Report:
    cm = np.asarray(cm, dtype=np.int64)
    per_class = {}
    for c in FaultClass:
        b = one_vs_rest(cm, int(c))
        per_class[c] = ClassMetrics(precision(b), recall(b), f1(b), b.tp + b.fn)
    total = int(cm.sum())
    return Report(
        model,
        _ratio(int(np.trace(cm)), total),
        per_class,
        cm,
        float(np.mean([m.precision for m in per_class.values()])),
        float(np.mean([m.recall for m in per_class.values()])),
        float(np.mean([m.f1 for m in per_class.values()])),
    )


TABLE_COLUMNS = ("Class", "Model", "Accuracy", "Precision", "Recall", "F1")


def table_rows(reports: Sequence[Report]) -> List[List[str]]:
    rows = []
    for c in REPORT_ORDER:
        for r in reports:
            m = r.per_class[c]
            rows.append([c.title, r.model, f"{r.accuracy:.2f}", f"{m.precision:.2f}", f"{m.recall:.2f}", f"{m.f1:.2f}"])
    return rows


def format_table(reports: Sequence[Report]) -> str:
    """Aligned plain-text table, one row per (class, model)."""
    if not reports:
        raise ValueError("need at least one report")
    rows = [list(TABLE_COLUMNS)] + table_rows(reports)
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = []
    for k, row in enumerate(rows):
        cells = [cell.ljust(widths[i]) if i < 2 else cell.rjust(widths[i]) for i, cell in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_confusion(cm) -> str:
    names = [c.title[:4] for c in FaultClass]
    head = "true\\pred " + " ".join(f"{n:>6}" for n in names)
    body = [f"{c.title[:9]:<9} " + " ".join(f"{int(v):>6}" for v in np.asarray(cm)[int(c)]) for c in FaultClass]
    return "\n".join([head] + body) + "\n"
