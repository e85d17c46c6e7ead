"""Classification and segmentation quality measures.

Malignant is the positive class. Ratios with a zero denominator return 0
and set a flag instead of raising, since early self-training iterations can
legitimately predict a single class.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from pseudomask.errors import DegenerateDataError, InvalidInputError
from pseudomask.imaging import as_mask, check_same_shape


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Ratio:
    """A metric value plus whether its denominator was zero."""

    value: float
    degenerate: bool = False

    def __float__(self):
        return self.value


def _labels(arr):
    return np.asarray(arr).astype(bool).ravel()


def confusion(predicted, truth):
    p, t = _labels(predicted), _labels(truth)
    if p.shape != t.shape:
        raise InvalidInputError(f"{p.size} predictions for {t.size} labels")
    if p.size == 0:
        raise InvalidInputError("confusion counts need at least one sample")
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def _ratio(num, den):
    if den == 0:
        return Ratio(0.0, True)
    return Ratio(num / den)


def precision(c):
    return _ratio(c.tp, c.tp + c.fp)


def recall(c):
    return _ratio(c.tp, c.tp + c.fn)


def accuracy(c):
    return _ratio(c.tp + c.tn, c.total)


def roc_auc(scores, truth):
    """Mann-Whitney estimate: P(random positive outranks random negative), ties count half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = _labels(truth)
    if s.shape != t.shape:
        raise InvalidInputError(f"{s.size} scores for {t.size} labels")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDataError("ROC AUC needs both classes")
    ranks = rankdata(s)  # average ranks resolve ties
    u = ranks[t].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def iou(a, b):
    """Intersection over union; two blank masks give 1.0 with the flag set."""
    a, b = as_mask(a), as_mask(b)
    check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return Ratio(1.0, True)
    return Ratio(np.count_nonzero(a & b) / union)


def summarize(predicted, truth, scores=None):
    """Counts plus accuracy/precision/recall (and AUC when both classes exist)."""
    c = confusion(predicted, truth)
    out = {
        "counts": c,
        "accuracy": accuracy(c),
        "precision": precision(c),
        "recall": recall(c),
        "auc": None,
    }
    if scores is not None:
        try:
            out["auc"] = Ratio(roc_auc(scores, truth))
        except DegenerateDataError:
            out["auc"] = Ratio(0.5, True)
    return out
