"""Binary classification metrics, accuracy drop, and ROC data."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Label
from .errors import MetricError, RocError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise MetricError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, y_true: Sequence, y_pred: Sequence, positive: Label = Label.VISHING):
        t = np.array([int(Label.parse(v)) for v in y_true]) == int(positive)
        p = np.array([int(Label.parse(v)) for v in y_pred]) == int(positive)
        if t.shape != p.shape:
            raise MetricError("label arrays differ in length")
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))

    def swapped(self) -> "ConfusionCounts":
        """Counts with the other class treated as positive."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalResult:
    precision: float
    recall: float
    accuracy: float
    f1: float
    confusion: ConfusionCounts
    per_class: dict[str, ClassScores] = field(default_factory=dict)
    # names of metrics whose denominator was zero and were reported as 0
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["undefined"] = list(self.undefined)
        return out


def _ratio(num: int, den: int) -> tuple[float, bool]:
    return (num / den, False) if den else (0.0, True)


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def compute_metrics(confusion: ConfusionCounts) -> EvalResult:
    """Precision, recall, accuracy and F1 with VISHING as the positive class.

    A zero denominator yields 0 and the metric name is listed in ``undefined``.
    """
    c = confusion
    if c.total < 1:
        raise MetricError("empty confusion matrix")
    precision, p_undef = _ratio(c.tp, c.tp + c.fp)
    recall, r_undef = _ratio(c.tp, c.tp + c.fn)
    accuracy = (c.tp + c.tn) / c.total
    undefined = tuple(n for n, u in (("precision", p_undef), ("recall", r_undef)) if u)

    per_class = {}
    for lab, cc in ((Label.VISHING, c), (Label.BENIGN, c.swapped())):
        p, _ = _ratio(cc.tp, cc.tp + cc.fp)
        r, _ = _ratio(cc.tp, cc.tp + cc.fn)
        per_class[lab.tag] = ClassScores(p, r, _f1(p, r), cc.tp + cc.fn)
    return EvalResult(precision, recall, accuracy, _f1(precision, recall), c, per_class, undefined)


def evaluate(y_true: Sequence, y_pred: Sequence) -> EvalResult:
    return compute_metrics(ConfusionCounts.from_labels(y_true, y_pred))


def accuracy_drop(original_acc: float, adversarial_acc: float) -> float:
    return original_acc - adversarial_acc


# -- ROC ----------------------------------------------------------------------

def roc_points(scores: Sequence[float], labels: Sequence) -> list[tuple[float, float, float]]:
    """ROC as ``(threshold, fpr, tpr)`` triples, thresholds descending.

    The first point is ``(inf, 0, 0)``; tied scores move together.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.array([int(Label.parse(v)) for v in labels])
    if s.shape != y.shape:
        raise RocError("scores and labels differ in length")
    n_pos, n_neg = int(y.sum()), int((1 - y).sum())
    if n_pos == 0 or n_neg == 0:
        raise RocError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    cut = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[cut]
    fp = np.cumsum(1 - y)[cut]
    pts = [(float("inf"), 0.0, 0.0)]
    pts += [(float(s[i]), fp[j] / n_neg, tp[j] / n_pos) for j, i in enumerate(cut)]
    return pts


def auc(points: Sequence[tuple]) -> float:
    """Trapezoidal area under ``(fpr, tpr)`` pairs (a leading threshold column is ignored)."""
    pts = [p[-2:] for p in points]
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_csv(points: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for thr, fpr, tpr in points:
        w.writerow([repr(float(thr)), repr(float(fpr)), repr(float(tpr))])
    return buf.getvalue()


EVAL_COLUMNS = ("name", "accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn", "undefined")


def eval_rows_csv(results: dict[str, EvalResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVAL_COLUMNS)
    for name, r in results.items():
        c = r.confusion
        w.writerow([name, f"{r.accuracy:.6f}", f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}",
                    c.tp, c.fp, c.tn, c.fn, ";".join(r.undefined)])
    return buf.getvalue()
