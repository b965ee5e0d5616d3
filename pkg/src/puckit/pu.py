"""Elkan-Noto PU estimators and Positive Unlabelled Conversion (PUC).

``f`` is any object with ``predict_proba(X) -> array`` giving p(s=1|x).  All
ids are row indices of the dataset passed in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .data import PUDataset
from .model import WeightedSet

log = logging.getLogger(__name__)

C_FLOOR = 1e-4
HIGH_PRIOR_WARNING = 0.95


@dataclass(frozen=True, eq=False)
class PuEstimates:
    """Label frequency ``c``, class prior and per-unlabelled-id weights.

    ``weights`` are clamped to [0, 1]; ``raw_weights`` keep the unclamped
    odds-ratio values used for ranking.
    """

    c: float
    prior: float
    weights: Mapping[int, float]
    raw_weights: Mapping[int, float] = field(default_factory=dict)
    warnings: tuple = ()

    def to_dict(self, origin: Optional[np.ndarray] = None) -> dict:
        key = (lambda i: int(i)) if origin is None else (lambda i: int(origin[i]))
        return {
            "c": self.c,
            "prior": self.prior,
            "weights": {str(key(i)): w for i, w in sorted(self.weights.items())},
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class ConvertedDataset:
    base: PUDataset
    converted_ids: frozenset
    labels: np.ndarray
    prior: float
    ranking: tuple = ()

    @property
    def remaining_unlabelled(self) -> np.ndarray:
        return np.flatnonzero((self.base.s == 0) & (self.labels == 0))

    def to_dict(self, origin: Optional[np.ndarray] = None) -> dict:
        key = (lambda i: int(i)) if origin is None else (lambda i: int(origin[i]))
        return {
            "prior": self.prior,
            "n_labelled": int(self.base.labelled_ids.size),
            "n_converted": len(self.converted_ids),
            "converted_ids": sorted(key(i) for i in self.converted_ids),
        }


# --------------------------------------------------------------------------
# c and w(x)


def estimate_c(f, val_positives: Union[PUDataset, np.ndarray]) -> float:
    """Mean of ``f`` over known positives, clamped to [1e-4, 1]."""
    if isinstance(val_positives, PUDataset):
        X = val_positives.X[val_positives.s == 1]
    else:
        X = np.asarray(val_positives, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot estimate c without labelled validation samples")
    X = np.atleast_2d(X)
    c = math.fsum(np.atleast_1d(f.predict_proba(X)).astype(np.float64)) / X.shape[0]
    return min(max(c, C_FLOOR), 1.0)


def _check_c(c: float) -> None:
    if not (c > 0.0) or c > 1.0:
        raise ValueError(f"label frequency c must lie in (0, 1], got {c}")


def raw_weight(p_s, c: float):
    """((1 - c) / c) * p_s / (1 - p_s), unclamped."""
    _check_c(c)
    p_s = np.asarray(p_s, dtype=np.float64)
    if ((p_s <= 0) | (p_s >= 1)).any():
        raise ValueError("p_s must lie strictly inside (0, 1)")
    w = (1.0 - c) / c * (p_s / (1.0 - p_s))
    return float(w) if w.ndim == 0 else w


def weight(p_s, c: float):
    """p(y=1 | x, s=0) from p(s=1 | x) and c, clamped to [0, 1]."""
    w = np.clip(raw_weight(p_s, c), 0.0, 1.0)
    return float(w) if np.ndim(w) == 0 else w


def unlabelled_weights(ds: PUDataset, f, c: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(ids, raw, clamped)`` for the unlabelled rows of ``ds``, ids ascending."""
    ids = ds.unlabelled_ids
    if ids.size == 0:
        empty = np.zeros(0)
        return ids, empty, empty
    raw = np.atleast_1d(raw_weight(f.predict_proba(ds.X[ids]), c))
    return ids, raw, np.clip(raw, 0.0, 1.0)


def _as_weight_array(ds: PUDataset, weights) -> np.ndarray:
    """Weights aligned with ``ds.unlabelled_ids``; a mapping must cover exactly those ids."""
    ids = ds.unlabelled_ids
    if isinstance(weights, Mapping):
        keys = {int(k) for k in weights}
        if keys != set(ids.tolist()):
            extra = sorted(keys - set(ids.tolist()))
            missing = sorted(set(ids.tolist()) - keys)
            raise ValueError(f"weights must cover exactly the unlabelled ids (extra {extra[:5]}, missing {missing[:5]})")
        return np.array([float(weights[int(i)]) for i in ids], dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size != ids.size:
        raise ValueError(f"expected {ids.size} weights, got {w.size}")
    return w


# --------------------------------------------------------------------------
# Estimators


def estimate_prior(ds: PUDataset, weights) -> float:
    """(|labelled| + sum of unlabelled weights) / k."""
    w = _as_weight_array(ds, weights)
    return (ds.labelled_ids.size + math.fsum(w)) / ds.size


def estimate_expectation(h: Callable, ds: PUDataset, f, c: float) -> float:
    """Empirical E[h(x, y)] with unlabelled rows split by w(x) between y=1 and y=0."""
    ids, _, w = unlabelled_weights(ds, f, c)
    wmap = dict(zip(ids.tolist(), w.tolist()))
    terms = []
    for i in range(ds.size):
        x = ds.X[i]
        if ds.s[i] == 1:
            terms.append(float(h(x, 1)))
        else:
            wi = wmap[i]
            terms.append(wi * float(h(x, 1)) + (1.0 - wi) * float(h(x, 0)))
    return math.fsum(terms) / ds.size


def estimate(ds: PUDataset, f, c: float) -> PuEstimates:
    ids, raw, w = unlabelled_weights(ds, f, c)
    prior = estimate_prior(ds, w)
    warnings = []
    if prior >= HIGH_PRIOR_WARNING:
        warnings.append(f"estimated prior {prior:.4f} is close to 1; PUC will convert nearly every unlabelled sample")
        log.warning(warnings[-1])
    return PuEstimates(
        c=c,
        prior=prior,
        weights=dict(zip(ids.tolist(), w.tolist())),
        raw_weights=dict(zip(ids.tolist(), raw.tolist())),
        warnings=tuple(warnings),
    )


# --------------------------------------------------------------------------
# Training sets


def build_weighted_set(ds: PUDataset, weights, positive_ids=()) -> WeightedSet:
    """Rows in id order: labelled and ``positive_ids`` once as (1, 1); every
    other unlabelled row twice, as (1, w) then (0, 1 - w)."""
    w = _as_weight_array(ds, weights)
    wmap = dict(zip(ds.unlabelled_ids.tolist(), w.tolist()))
    pos = set(int(i) for i in positive_ids)
    rows, targets, ws = [], [], []
    for i in range(ds.size):
        if ds.s[i] == 1 or i in pos:
            rows.append(i)
            targets.append(1)
            ws.append(1.0)
        else:
            wi = wmap[i]
            rows += [i, i]
            targets += [1, 0]
            ws += [wi, 1.0 - wi]
    rows = np.asarray(rows, dtype=np.int64)
    return WeightedSet(X=ds.X[rows], target=targets, weight=ws, source=rows)


def build_pu_training_set(ds: PUDataset, f, c: float) -> WeightedSet:
    _, _, w = unlabelled_weights(ds, f, c)
    return build_weighted_set(ds, w)


# --------------------------------------------------------------------------
# PUC


def convert_by_weights(ds: PUDataset, raw_weights) -> ConvertedDataset:
    """Convert top-ranked unlabelled ids to positives until the positive
    fraction reaches the prior estimated from the clamped weights.

    Ranking is by unclamped weight, descending, ties by ascending id.
    """
    ids = ds.unlabelled_ids
    raw = _as_weight_array(ds, raw_weights)
    clamped = np.clip(raw, 0.0, 1.0)
    prior = estimate_prior(ds, clamped)
    ranking = ids[np.lexsort((ids, -raw))]
    k = ds.size
    n_lab = ds.labelled_ids.size
    reached = (n_lab + np.arange(ids.size + 1)) / k >= prior
    n_conv = int(np.flatnonzero(reached)[0])
    converted = ranking[:n_conv]
    labels = ds.s.astype(np.int8).copy()
    labels[converted] = 1
    labels.setflags(write=False)
    return ConvertedDataset(
        base=ds,
        converted_ids=frozenset(int(i) for i in converted),
        labels=labels,
        prior=prior,
        ranking=tuple(int(i) for i in ranking),
    )


def puc_convert(ds: PUDataset, f, c: float) -> ConvertedDataset:
    ids, raw, _ = unlabelled_weights(ds, f, c)
    return convert_by_weights(ds, raw)


def build_puc_training_set(conv: ConvertedDataset, weights) -> WeightedSet:
    """Labelled and converted rows as weight-1 positives; the rest as weighted pairs."""
    return build_weighted_set(conv.base, weights, positive_ids=conv.converted_ids)
