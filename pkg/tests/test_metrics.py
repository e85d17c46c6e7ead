import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudomask.errors import DegenerateDataError
from pseudomask.metrics import (
    ConfusionCounts,
    accuracy,
    confusion,
    iou,
    precision,
    recall,
    roc_auc,
    summarize,
)


def pair_count_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_confusion_cases():
    assert confusion([1, 0, 1, 0], [1, 0, 1, 0]) == ConfusionCounts(2, 0, 2, 0)
    c = confusion([1, 1, 1, 1], [1, 1, 0, 0])
    assert c.tn == 0 and c.tp == 2 and c.fp == 2 and c.fn == 0
    c = confusion([1, 1, 0, 0], [1, 0, 0, 1])
    assert c == ConfusionCounts(1, 1, 1, 1) and c.total == 4


def test_ratios():
    c = ConfusionCounts(1, 1, 1, 1)
    assert precision(c).value == recall(c).value == accuracy(c).value == 0.5
    perfect = ConfusionCounts(3, 0, 2, 0)
    assert precision(perfect).value == recall(perfect).value == accuracy(perfect).value == 1.0
    none = ConfusionCounts(0, 0, 3, 2)
    assert precision(none).value == 0.0 and precision(none).degenerate
    assert not recall(none).degenerate


def test_auc_cases():
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert roc_auc([0.5] * 4, [0, 1, 0, 1]) == 0.5
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    with pytest.raises(DegenerateDataError):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_matches_pair_count_exhaustively(rng):
    for n in range(2, 9):
        scores = rng.integers(0, 4, size=n).astype(float)  # coarse grid forces ties
        for labels in itertools.product([0, 1], repeat=n):
            if 0 < sum(labels) < n:
                assert roc_auc(scores, labels) == pair_count_auc(scores, labels)
    for n in range(9, 13):
        for _ in range(300):
            scores = rng.integers(0, 6, size=n).astype(float)
            labels = rng.integers(0, 2, size=n)
            if 0 < labels.sum() < n:
                assert roc_auc(scores, labels) == pair_count_auc(scores, labels)


score_lists = st.lists(st.integers(-100, 100), min_size=2, max_size=12)


@given(score_lists, st.data())
def test_auc_rank_invariance(scores, data):
    labels = data.draw(st.lists(st.booleans(), min_size=len(scores), max_size=len(scores)))
    if all(labels) or not any(labels):
        return
    s = np.array(scores, dtype=float)
    assert roc_auc(np.exp(s / 50.0), labels) == pytest.approx(roc_auc(s, labels), abs=1e-12)
    if len(set(scores)) == len(scores):
        assert roc_auc(s, labels) + roc_auc(-s, labels) == pytest.approx(1.0, abs=1e-12)


def test_iou_cases():
    a = np.zeros((4, 8), bool)
    a[:, :4] = True
    assert iou(a, a).value == 1.0
    assert iou(a, ~a).value == 0.0
    b = np.zeros((4, 8), bool)
    b[:, 2:6] = True
    assert iou(a, b).value == pytest.approx(1 / 3)
    blank = np.zeros((3, 3), bool)
    assert iou(blank, blank).degenerate


@given(st.lists(st.booleans(), min_size=9, max_size=9), st.lists(st.booleans(), min_size=9, max_size=9))
def test_iou_symmetric(a, b):
    a, b = np.array(a).reshape(3, 3), np.array(b).reshape(3, 3)
    assert iou(a, b).value == iou(b, a).value
    if a.any() or b.any():
        assert (iou(a, b).value == 1.0) == np.array_equal(a, b)


def test_summarize_degenerate_auc():
    s = summarize([1, 1], [1, 1], [0.7, 0.9])
    assert s["auc"].degenerate and s["auc"].value == 0.5
    assert s["counts"].total == 2
