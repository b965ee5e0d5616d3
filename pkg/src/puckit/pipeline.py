"""Training modes: PN baseline, PU, PUC, transfer and seed ensembles.

Each run splits the dataset 80/20, trains on the first part and checkpoints
on the second.  Component seeds come from ``cfg.seed`` through
:func:`puckit.seeding.derive_seed`, with the same keys in every mode, so PN,
PU and PUC runs under one seed share their split, ``g`` initialisation and
batch order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .data import PUDataset, SplitSpec, split_train_val
from .errors import ConfigError, IncompatibleError
from .model import ProbClassifier, TrainConfig, WeightedSet, init_model, reinit_head, train
from .pu import (
    ConvertedDataset,
    PuEstimates,
    build_puc_training_set,
    build_weighted_set,
    convert_by_weights,
    estimate,
    estimate_c,
)

log = logging.getLogger(__name__)

MODES = ("PN", "PU", "PUC")
SPLIT_RATIO = 0.8


@dataclass(frozen=True)
class TrainMode:
    """``tag`` selects the procedure for ``g``; ``transfer`` is an optional
    source model whose body warm-starts ``g``."""

    tag: str
    transfer: Optional[ProbClassifier] = None
    transfer_tag: Optional[str] = None

    def __post_init__(self):
        tag = self.tag.upper()
        if tag not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(m.lower() for m in MODES)}, got {self.tag!r}")
        object.__setattr__(self, "tag", tag)


@dataclass(frozen=True, eq=False)
class RunResult:
    mode: str
    g: ProbClassifier
    split: SplitSpec
    f: Optional[ProbClassifier] = None
    estimates: Optional[PuEstimates] = None
    conversion: Optional[ConvertedDataset] = None
    training_set: Optional[WeightedSet] = None

    @property
    def train_origin(self) -> np.ndarray:
        """Dataset ids of the training rows (estimate/conversion ids index into this)."""
        return self.split.train_ids


def _component(cfg: TrainConfig, key: int) -> TrainConfig:
    return replace(cfg, seed=seeding.derive_seed(cfg.seed, key))


def _split(ds: PUDataset, cfg: TrainConfig, require_labelled: bool) -> SplitSpec:
    return split_train_val(
        ds, SPLIT_RATIO, seeding.derive_seed(cfg.seed, seeding.SPLIT), require_labelled=require_labelled
    )


def _g_init(ds: PUDataset, cfg: TrainConfig, transfer: Optional[ProbClassifier]) -> ProbClassifier:
    g_cfg = _component(cfg, seeding.G_MODEL)
    if transfer is None:
        return init_model(ds.dim, cfg.hidden_dim, g_cfg.seed)
    if transfer.input_dim != ds.dim:
        raise IncompatibleError(
            f"pretrained model expects {transfer.input_dim} features, dataset has {ds.dim}"
        )
    return reinit_head(transfer, seeding.derive_seed(cfg.seed, seeding.HEAD))


def fit(
    ds: PUDataset,
    mode: TrainMode | str,
    cfg: TrainConfig,
    *,
    label_freq: Optional[float] = None,
) -> RunResult:
    """Train ``g`` on ``ds`` under ``mode``.

    ``label_freq`` replaces the estimate of c with a known value.
    """
    if isinstance(mode, str):
        mode = TrainMode(mode)
    if ds.size == 0:
        raise ValueError("empty dataset")
    tag = mode.tag
    if tag != "PN":
        if ds.labelled_ids.size == 0:
            raise ValueError("PU training needs at least one labelled sample")
        if ds.unlabelled_ids.size == 0:
            log.warning("no unlabelled samples; %s degenerates to PN training", tag)
    split = _split(ds, cfg, require_labelled=tag != "PN")
    train_ds, val_ds = ds.take(split.train_ids), ds.take(split.val_ids)
    g_cfg = _component(cfg, seeding.G_MODEL)
    g0 = _g_init(ds, cfg, mode.transfer)

    if tag == "PN":
        examples = WeightedSet.unit(train_ds)
        g = train(examples, val_ds, g_cfg, init=g0)
        return RunResult("PN", g, split, training_set=examples)

    f = train(WeightedSet.unit(train_ds), val_ds, _component(cfg, seeding.F_MODEL))
    c = estimate_c(f, val_ds) if label_freq is None else float(label_freq)
    est = estimate(train_ds, f, c)
    log.info("%s: c=%.4f prior=%.4f", tag, est.c, est.prior)
    ids = train_ds.unlabelled_ids
    weights = np.array([est.weights[int(i)] for i in ids])
    conv = None
    if tag == "PU":
        examples = build_weighted_set(train_ds, weights)
    else:
        conv = convert_by_weights(train_ds, np.array([est.raw_weights[int(i)] for i in ids]))
        log.info("PUC: converted %d of %d unlabelled samples", len(conv.converted_ids), ids.size)
        examples = build_puc_training_set(conv, weights)
    g = train(examples, val_ds, g_cfg, init=g0)
    return RunResult(tag, g, split, f=f, estimates=est, conversion=conv, training_set=examples)


def train_pn(ds: PUDataset, cfg: TrainConfig) -> ProbClassifier:
    """``g`` trained directly on ``(x, s)`` with unit weights."""
    return fit(ds, "PN", cfg).g


def train_pu(ds: PUDataset, cfg: TrainConfig, *, label_freq: Optional[float] = None):
    """Return ``(f, g, estimates)``."""
    r = fit(ds, "PU", cfg, label_freq=label_freq)
    return r.f, r.g, r.estimates


def train_puc(ds: PUDataset, cfg: TrainConfig, *, label_freq: Optional[float] = None):
    """Return ``(f, g, estimates, conversion)``."""
    r = fit(ds, "PUC", cfg, label_freq=label_freq)
    return r.f, r.g, r.estimates, r.conversion


# --------------------------------------------------------------------------
# Transfer


@dataclass(frozen=True, eq=False)
class TransferResult:
    source: RunResult
    init: ProbClassifier
    target: RunResult

    @property
    def model(self) -> ProbClassifier:
        return self.target.g


def pretrain_finetune(
    source: PUDataset,
    target: PUDataset,
    source_mode: TrainMode | str,
    target_mode: TrainMode | str,
    cfg: TrainConfig,
) -> TransferResult:
    """Train ``g`` on ``source``, keep its body under a fresh head and train
    on ``target``.  The target ``f`` is trained from scratch."""
    if source.dim != target.dim:
        raise IncompatibleError(f"source has {source.dim} features, target has {target.dim}")
    src_mode = TrainMode(source_mode) if isinstance(source_mode, str) else source_mode
    tgt_mode = TrainMode(target_mode) if isinstance(target_mode, str) else target_mode
    src = fit(source, src_mode, _component(cfg, seeding.SOURCE))
    tgt_mode = TrainMode(tgt_mode.tag, transfer=src.g, transfer_tag=src_mode.tag)
    init = _g_init(target, cfg, src.g)
    tgt = fit(target, tgt_mode, cfg)
    return TransferResult(source=src, init=init, target=tgt)


# --------------------------------------------------------------------------
# Ensembles


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    members: tuple
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("an ensemble needs at least one member")

    def votes(self, X) -> np.ndarray:
        return np.sum([np.asarray(m.predict_proba(X)) >= self.threshold for m in self.members], axis=0)


def vote(member_preds: Sequence[np.ndarray]) -> np.ndarray:
    """Majority label per column of a (members, samples) 0/1 array; ties go to 1."""
    p = np.asarray(member_preds)
    if p.ndim == 1:
        p = p[:, None]
    if p.shape[0] == 0:
        raise ValueError("an ensemble needs at least one member")
    return (2 * p.sum(axis=0) >= p.shape[0]).astype(np.int8)


def ensemble_predict(e: EnsembleModel, x):
    """Majority vote of members' thresholded predictions; an exact tie gives 1."""
    votes = e.votes(x)
    label = (2 * votes >= len(e.members)).astype(np.int8)
    return int(label) if np.ndim(label) == 0 else label
