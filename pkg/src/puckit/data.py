"""Datasets of labelled/unlabelled samples: model, file formats, splits and
SCAR synthesis.

Datasets are stored column-wise as numpy arrays.  A row ``i`` has features
``X[i]``, labelled-indicator ``s[i]`` and, for synthetic or annotated data,
the hidden class ``truth[i]``.  Arrays are frozen (``writeable=False``) once a
dataset is built.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, DatasetFormatError, DatasetValidationError
from .seeding import rng as make_rng

PROB_EPS = 1e-7


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    id: int
    features: np.ndarray
    s: int
    truth: Optional[int] = None
    group: Optional[str] = None


@dataclass(frozen=True, eq=False)
class PUDataset:
    """``k`` samples of dimension ``d`` with labelled-indicator ``s``.

    ``origin`` maps row index to the id the row had in the dataset it was
    taken from (identity for freshly loaded or generated data).
    """

    X: np.ndarray
    s: np.ndarray
    truth: Optional[np.ndarray] = None
    groups: Optional[np.ndarray] = None
    origin: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DatasetValidationError("features must form a 2-D array")
        k = X.shape[0]
        s = np.asarray(self.s)
        if s.shape != (k,):
            raise DatasetValidationError("label vector length does not match sample count")
        if not np.isin(s, (0, 1)).all():
            raise DatasetValidationError("labels must be 0 or 1")
        if not np.isfinite(X).all():
            raise DatasetValidationError("features must be finite")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "s", _frozen(s.astype(np.int8)))
        if self.truth is not None:
            t = np.asarray(self.truth)
            if t.shape != (k,) or not np.isin(t, (-1, 0, 1)).all():
                raise DatasetValidationError("truth must be a 0/1 vector of length k (-1 for unknown)")
            bad = np.flatnonzero((s == 1) & (t == 0))
            if bad.size:
                raise DatasetValidationError(
                    f"labelled samples must be positive; ids {bad[:10].tolist()} have truth 0"
                )
            object.__setattr__(self, "truth", _frozen(t.astype(np.int8)))
        if self.groups is not None:
            g = np.asarray(self.groups, dtype=object)
            if g.shape != (k,):
                raise DatasetValidationError("group vector length does not match sample count")
            object.__setattr__(self, "groups", _frozen(g.astype(str)))
        origin = np.arange(k) if self.origin is None else np.asarray(self.origin, dtype=np.int64)
        object.__setattr__(self, "origin", _frozen(origin))

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.size)

    def missing_truth_ids(self) -> np.ndarray:
        """Ids without a gold label (all ids when the dataset has no truth)."""
        if self.truth is None:
            return self.ids
        return np.flatnonzero(self.truth < 0)

    @property
    def labelled_ids(self) -> np.ndarray:
        return np.flatnonzero(self.s == 1)

    @property
    def unlabelled_ids(self) -> np.ndarray:
        return np.flatnonzero(self.s == 0)

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Sample]:
        for i in range(self.size):
            yield self[i]

    def __getitem__(self, i: int) -> Sample:
        return Sample(
            id=int(i),
            features=self.X[i],
            s=int(self.s[i]),
            truth=None if self.truth is None or self.truth[i] < 0 else int(self.truth[i]),
            group=None if self.groups is None else str(self.groups[i]),
        )

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def take(self, ids: Sequence[int]) -> "PUDataset":
        """Sub-dataset of ``ids`` (in the given order), renumbered from 0."""
        ids = np.asarray(ids, dtype=np.int64)
        return PUDataset(
            X=self.X[ids],
            s=self.s[ids],
            truth=None if self.truth is None else self.truth[ids],
            groups=None if self.groups is None else self.groups[ids],
            origin=self.origin[ids],
        )

    def with_labels(self, s: np.ndarray) -> "PUDataset":
        return PUDataset(X=self.X, s=s, truth=self.truth, groups=self.groups, origin=self.origin)

    def fingerprint(self) -> str:
        """SHA-256 over features, labels, truth and groups."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.s, dtype="i1").tobytes())
        if self.truth is not None:
            h.update(b"truth")
            h.update(np.ascontiguousarray(self.truth, dtype="i1").tobytes())
        if self.groups is not None:
            h.update(b"groups")
            h.update("\x1f".join(self.groups.tolist()).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SplitSpec:
    train_ids: np.ndarray
    val_ids: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train_ids", _frozen(np.asarray(self.train_ids, dtype=np.int64)))
        object.__setattr__(self, "val_ids", _frozen(np.asarray(self.val_ids, dtype=np.int64)))
        if np.intersect1d(self.train_ids, self.val_ids).size:
            raise ValueError("train and validation ids overlap")


# --------------------------------------------------------------------------
# File formats


def _parse_binary(value: str, what: str, row: int) -> int:
    try:
        v = float(value)
    except ValueError:
        raise DatasetValidationError(f"row {row}: {what} {value!r} is not a number") from None
    if v not in (0.0, 1.0):
        raise DatasetValidationError(f"row {row}: {what} must be 0 or 1, got {value!r}")
    return int(v)


def _assemble(rows_x, rows_s, rows_t, rows_g, rows_id) -> PUDataset:
    if not rows_x:
        raise DatasetFormatError("empty dataset")
    dims = {len(x) for x in rows_x}
    if len(dims) != 1:
        raise DatasetFormatError(f"ragged rows: feature counts {sorted(dims)}")
    if dims == {0}:
        raise DatasetFormatError("rows have no feature columns")
    order = np.argsort(np.asarray(rows_id), kind="stable")
    if sorted(rows_id) != list(range(len(rows_id))):
        raise DatasetValidationError("ids must be unique and contiguous from 0")
    X = np.asarray(rows_x, dtype=np.float64)[order]
    s = np.asarray(rows_s, dtype=np.int8)[order]
    truth = None
    if rows_t is not None and any(t is not None for t in rows_t):
        truth = np.asarray([-1 if t is None else t for t in rows_t], dtype=np.int8)[order]
    groups = None if rows_g is None else np.asarray(rows_g, dtype=object)[order]
    return PUDataset(X=X, s=s, truth=truth, groups=groups)


def _load_csv(path: Path) -> PUDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetFormatError("empty dataset")
        header = [h.strip() for h in header]
        if header[:2] != ["id", "label"]:
            raise DatasetFormatError("CSV header must start with 'id,label'")
        feat_cols = [i for i, h in enumerate(header) if h.startswith("f") and h[1:].isdigit()]
        expected = [f"f{j}" for j in range(len(feat_cols))]
        if [header[i] for i in feat_cols] != expected:
            raise DatasetFormatError("feature columns must be named f0..f{d-1} in order")
        t_col = header.index("truth") if "truth" in header else None
        g_col = header.index("group") if "group" in header else None
        xs, ss, ts, gs, ids = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                ids.append(int(row[0]))
                xs.append([float(row[i]) for i in feat_cols])
            except ValueError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            ss.append(_parse_binary(row[1], "label", lineno))
            if t_col is not None:
                ts.append(None if row[t_col] == "" else _parse_binary(row[t_col], "truth", lineno))
            if g_col is not None:
                gs.append(row[g_col])
    return _assemble(xs, ss, ts if t_col is not None else None, gs if g_col is not None else None, ids)


def _load_jsonl(path: Path) -> PUDataset:
    xs, ss, ts, gs, ids = [], [], [], [], []
    has_t = has_g = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            if "label" not in rec or "features" not in rec:
                raise DatasetFormatError(f"line {lineno}: needs 'label' and 'features'")
            ids.append(int(rec.get("id", len(ids))))
            xs.append([float(v) for v in rec["features"]])
            ss.append(_parse_binary(str(rec["label"]), "label", lineno))
            t = rec.get("truth")
            ts.append(None if t is None else _parse_binary(str(t), "truth", lineno))
            has_t = has_t or t is not None
            g = rec.get("group")
            gs.append(None if g is None else str(g))
            has_g = has_g or g is not None
    return _assemble(xs, ss, ts if has_t else None, gs if has_g else None, ids)


def load_dataset(path, format: Optional[str] = None) -> PUDataset:
    """Read a CSV or JSONL dataset; ``format`` defaults to the file suffix."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return _load_csv(path)
    if fmt in ("jsonl", "ndjson"):
        return _load_jsonl(path)
    raise DatasetFormatError(f"unknown dataset format {fmt!r}")


def _num(v: float) -> str:
    return repr(float(v))


def save_dataset(ds: PUDataset, path, format: Optional[str] = None) -> None:
    """Write ``ds``.  Floats are written with ``repr`` so reloading is exact."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        header = ["id", "label"]
        if ds.truth is not None:
            header.append("truth")
        if ds.groups is not None:
            header.append("group")
        header += [f"f{j}" for j in range(ds.dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(ds.size):
                row = [str(i), str(int(ds.s[i]))]
                if ds.truth is not None:
                    row.append("" if ds.truth[i] < 0 else str(int(ds.truth[i])))
                if ds.groups is not None:
                    row.append(str(ds.groups[i]))
                row += [_num(v) for v in ds.X[i]]
                w.writerow(row)
    elif fmt in ("jsonl", "ndjson"):
        with open(path, "w") as fh:
            for i in range(ds.size):
                rec = {"id": i, "label": int(ds.s[i])}
                if ds.truth is not None and ds.truth[i] >= 0:
                    rec["truth"] = int(ds.truth[i])
                if ds.groups is not None:
                    rec["group"] = str(ds.groups[i])
                rec["features"] = [float(v) for v in ds.X[i]]
                fh.write(json.dumps(rec) + "\n")
    else:
        raise DatasetFormatError(f"unknown dataset format {fmt!r}")


# --------------------------------------------------------------------------
# Splitting


def split_train_val(
    ds: PUDataset, ratio: float = 0.8, seed: int = 0, *, require_labelled: bool = True
) -> SplitSpec:
    """Shuffle ids under ``seed`` and cut ``round(ratio * k)`` of them for training.

    The validation side must hold at least one labelled sample.  If the plain
    shuffle leaves none there, the earliest labelled id in shuffled order is
    exchanged with the first validation slot.  With ``require_labelled=False``
    a dataset without labelled samples is split plainly instead of rejected.
    """
    k = ds.size
    if k == 0:
        raise ConfigError("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    n_train = int(math.floor(ratio * k + 0.5))
    if n_train < 1 or n_train > k - 1:
        raise ConfigError(
            f"ratio {ratio} on {k} samples leaves an empty side ({n_train} train / {k - n_train} val)"
        )
    has_labelled = bool((ds.s == 1).any())
    if require_labelled and not has_labelled:
        raise ConfigError("dataset has no labelled samples; validation positives are required")
    perm = make_rng(seed).permutation(k)
    if has_labelled and not (ds.s[perm[n_train:]] == 1).any():
        first_lab = int(np.flatnonzero(ds.s[perm] == 1)[0])
        perm[first_lab], perm[n_train] = perm[n_train], perm[first_lab]
    return SplitSpec(train_ids=np.sort(perm[:n_train]), val_ids=np.sort(perm[n_train:]), seed=seed)


# --------------------------------------------------------------------------
# SCAR synthesis


@dataclass(frozen=True)
class FeatureModel:
    """Two Gaussian class-conditionals sharing a diagonal covariance."""

    pos_mean: tuple
    neg_mean: tuple
    variance: tuple

    def __post_init__(self):
        for name in ("pos_mean", "neg_mean", "variance"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not (len(self.pos_mean) == len(self.neg_mean) == len(self.variance) >= 1):
            raise ConfigError("feature model means and variances must share one dimension")
        if any(v <= 0 or not math.isfinite(v) for v in self.variance):
            raise ConfigError("feature variances must be positive")

    @property
    def dim(self) -> int:
        return len(self.pos_mean)

    @classmethod
    def separable(cls, dim: int = 2, offset: float = 2.0, variance: float = 1.0) -> "FeatureModel":
        """Means at +offset and -offset on every axis.

        With the defaults the Bayes error at prior 0.5 is Phi(-offset*sqrt(dim)/sqrt(variance)),
        about 0.0023 for dim=2.
        """
        return cls((offset,) * dim, (-offset,) * dim, (variance,) * dim)

    def to_dict(self) -> dict:
        return {"pos_mean": list(self.pos_mean), "neg_mean": list(self.neg_mean), "variance": list(self.variance)}


@dataclass(frozen=True)
class ScarConfig:
    n: int
    prior: float
    label_freq: float
    feature_model: FeatureModel = field(default_factory=FeatureModel.separable)
    seed: int = 0
    n_groups: int = 0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.prior < 1.0:
            raise ConfigError(f"prior out of range: {self.prior} not in (0, 1)")
        if not 0.0 < self.label_freq <= 1.0:
            raise ConfigError(f"label_freq out of range: {self.label_freq} not in (0, 1]")
        if self.n_groups < 0:
            raise ConfigError("n_groups must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def dim(self) -> int:
        return self.feature_model.dim

    @classmethod
    def from_dict(cls, d: dict) -> "ScarConfig":
        d = dict(d)
        unknown = set(d) - {"n", "prior", "label_freq", "feature_model", "seed", "n_groups"}
        if unknown:
            raise ConfigError(f"unknown generator config keys: {sorted(unknown)}")
        missing = {"n", "prior", "label_freq"} - set(d)
        if missing:
            raise ConfigError(f"generator config missing keys: {sorted(missing)}")
        fm = d.pop("feature_model", None)
        if fm is None:
            fm = FeatureModel.separable()
        elif isinstance(fm, dict):
            try:
                fm = FeatureModel(**fm)
            except TypeError as exc:
                raise ConfigError(f"bad feature_model: {exc}") from None
        return cls(feature_model=fm, **d)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "prior": self.prior,
            "label_freq": self.label_freq,
            "feature_model": self.feature_model.to_dict(),
            "seed": self.seed,
            "n_groups": self.n_groups,
        }


def generate_scar(cfg: ScarConfig) -> PUDataset:
    """Draw ``y ~ Bernoulli(prior)``, ``x | y`` from the class Gaussian and
    ``s ~ Bernoulli(label_freq)`` for positives (``s = 0`` for negatives)."""
    g = make_rng(cfg.seed)
    fm = cfg.feature_model
    y = g.random(cfg.n) < cfg.prior
    noise = g.standard_normal((cfg.n, fm.dim)) * np.sqrt(np.asarray(fm.variance))
    means = np.where(y[:, None], np.asarray(fm.pos_mean), np.asarray(fm.neg_mean))
    X = means + noise
    s = y & (g.random(cfg.n) < cfg.label_freq)
    groups = None
    if cfg.n_groups:
        groups = np.array([f"g{j}" for j in g.integers(cfg.n_groups, size=cfg.n)], dtype=object)
    return PUDataset(X=X, s=s.astype(np.int8), truth=y.astype(np.int8), groups=groups)


class BayesOracle:
    """Closed-form posteriors for a ``ScarConfig``.

    ``target="y"`` gives p(y=1|x); ``target="s"`` gives p(s=1|x) = c * p(y=1|x).
    Output is clamped like a trained classifier's.
    """

    def __init__(self, cfg: ScarConfig, target: str = "s"):
        if target not in ("s", "y"):
            raise ValueError("target must be 's' or 'y'")
        self.cfg = cfg
        self.target = target
        self.input_dim = cfg.dim

    def posterior(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        fm = self.cfg.feature_model
        var = np.asarray(fm.variance)
        mu1, mu0 = np.asarray(fm.pos_mean), np.asarray(fm.neg_mean)
        logit = math.log(self.cfg.prior / (1 - self.cfg.prior)) + (
            ((X - mu0) ** 2 - (X - mu1) ** 2) / (2 * var)
        ).sum(axis=1)
        return 0.5 * (1.0 + np.tanh(0.5 * logit))

    def predict_proba(self, X) -> np.ndarray:
        p = self.posterior(X)
        if self.target == "s":
            p = self.cfg.label_freq * p
        return np.clip(p, PROB_EPS, 1 - PROB_EPS)
