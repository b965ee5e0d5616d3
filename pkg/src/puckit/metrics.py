"""Classification and ranking metrics.

0/0 precision or recall is reported as 0, and F1 is 0 whenever p + r = 0.
Average precision follows the CheckThat! scorer: precision at each rank that
holds a positive, averaged over the number of positives.

F1, AP and mAP are rational numbers; they are computed exactly and rounded
once, so results do not depend on summation order.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


def confusion(preds: Sequence[int], golds: Sequence[int]) -> tuple[int, int, int, int]:
    """Return ``(tp, fp, fn, tn)``."""
    p = np.asarray(preds)
    g = np.asarray(golds)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape[0] if p.ndim else 0} predictions vs {g.shape[0] if g.ndim else 0} golds")
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a non-empty 1-D prediction vector")
    p = p.astype(bool)
    g = g.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(p.size - tp - fp - fn)
    return tp, fp, fn, tn


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    # 2pr / (p + r) simplifies to one division of counts
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return p, r, f1


def precision_recall_f1(preds: Sequence[int], golds: Sequence[int]) -> tuple[float, float, float]:
    tp, fp, fn, _ = confusion(preds, golds)
    return prf_from_counts(tp, fp, fn)


def average_precision(ranked_golds: Sequence[int]) -> float:
    """AP of a relevance list already sorted by decreasing score.

    >>> average_precision([1, 0, 1])
    0.8333333333333333
    """
    r = np.asarray(ranked_golds).astype(bool)
    if r.ndim != 1:
        raise ValueError("ranked_golds must be 1-D")
    n_pos = int(r.sum())
    if n_pos == 0:
        raise ValueError("average precision is undefined without a positive item")
    ranks = (np.flatnonzero(r) + 1).tolist()
    return float(_exact_ap(ranks))


def _sum_fractions(terms: list) -> Fraction:
    # balanced tree keeps the intermediate denominators small
    if len(terms) == 1:
        return terms[0]
    mid = len(terms) // 2
    return _sum_fractions(terms[:mid]) + _sum_fractions(terms[mid:])


def _exact_ap(ranks: list) -> Fraction:
    terms = [Fraction(hit, rank) for hit, rank in enumerate(ranks, start=1)]
    return _sum_fractions(terms) / len(terms)


def mean_ap(queries: Iterable[Sequence[int]]) -> float:
    aps = []
    for q in queries:
        average_precision(q)  # validates the query
        aps.append(_exact_ap((np.flatnonzero(np.asarray(q).astype(bool)) + 1).tolist()))
    if not aps:
        raise ValueError("mean average precision needs at least one query")
    return float(_sum_fractions(aps) / len(aps))


def rank_by_score(scores: Sequence[float], golds: Sequence[int], tiebreak: Sequence[float] | None = None) -> np.ndarray:
    """Golds reordered by descending score; ties by descending ``tiebreak``, then index."""
    scores = np.asarray(scores, dtype=np.float64)
    keys = [np.arange(scores.size)]
    if tiebreak is not None:
        keys.append(-np.asarray(tiebreak, dtype=np.float64))
    keys.append(-scores)
    order = np.lexsort(keys)
    return np.asarray(golds)[order]
