"""One-hidden-layer probabilistic classifier trained with weighted BCE.

The same model type plays both roles in PU learning: ``f`` predicts whether a
sample is labelled and ``g`` predicts whether it is positive.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

from .data import PROB_EPS, PUDataset
from .errors import ConfigError, IncompatibleError, TrainingError
from .metrics import precision_recall_f1
from .seeding import derive_seed, rng

log = logging.getLogger(__name__)

MODEL_FORMAT = "puckit.model/1"


@dataclass(frozen=True)
class TrainConfig:
    max_lr: float = 0.05
    warmup_steps: int = 50
    weight_decay: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    hidden_dim: int = 16

    def __post_init__(self):
        if not (self.max_lr > 0 and math.isfinite(self.max_lr)):
            raise ConfigError("max_lr must be positive")
        if self.warmup_steps < 1:
            raise ConfigError("warmup_steps must be at least 1")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch_size < 1 or self.hidden_dim < 1:
            raise ConfigError("batch_size and hidden_dim must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WeightedExample:
    features: np.ndarray
    target: int
    weight: float


@dataclass(frozen=True, eq=False)
class WeightedSet:
    """Training rows as parallel arrays.

    ``source`` holds the dataset row each example came from, so the two
    copies of a duplicated unlabelled sample share a source id.
    """

    X: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    source: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        n = X.shape[0]
        t = np.asarray(self.target, dtype=np.float64)
        w = np.asarray(self.weight, dtype=np.float64)
        if t.shape != (n,) or w.shape != (n,):
            raise ValueError("targets and weights must match the number of rows")
        if not np.isin(t, (0.0, 1.0)).all():
            raise ValueError("targets must be 0 or 1")
        if ((w < 0) | (w > 1)).any() or not np.isfinite(w).all():
            raise ValueError("weights must lie in [0, 1]")
        src = np.arange(n) if self.source is None else np.asarray(self.source, dtype=np.int64)
        for name, val in (("X", X), ("target", t), ("weight", w), ("source", src)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def __len__(self) -> int:
        return self.X.shape[0]

    def __iter__(self) -> Iterator[WeightedExample]:
        for i in range(len(self)):
            yield WeightedExample(self.X[i], int(self.target[i]), float(self.weight[i]))

    @classmethod
    def from_examples(cls, examples) -> "WeightedSet":
        examples = list(examples)
        if not examples:
            raise ValueError("no training examples")
        return cls(
            X=np.stack([np.asarray(e.features, dtype=np.float64) for e in examples]),
            target=[e.target for e in examples],
            weight=[e.weight for e in examples],
        )

    @classmethod
    def unit(cls, ds: PUDataset) -> "WeightedSet":
        """Every row once with target ``s`` and weight 1."""
        return cls(X=ds.X, target=ds.s, weight=np.ones(ds.size), source=ds.ids)


@dataclass(frozen=True, eq=False)
class ProbClassifier:
    """``sigmoid(w2 . tanh(W1 x + b1) + b2)``."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    lineage: tuple = field(default=())

    def __post_init__(self):
        W1 = np.array(self.W1, dtype=np.float64)
        h = W1.shape[0]
        b1 = np.array(self.b1, dtype=np.float64).reshape(h)
        w2 = np.array(self.w2, dtype=np.float64).reshape(h)
        for name, val in (("W1", W1), ("b1", b1), ("w2", w2)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "b2", float(self.b2))
        object.__setattr__(self, "lineage", tuple(tuple(x) for x in self.lineage))

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_params(self) -> int:
        d, h = self.input_dim, self.hidden_dim
        return d * h + h + h + 1

    # -- forward -----------------------------------------------------------

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.input_dim:
            raise IncompatibleError(f"expected {self.input_dim} features, got {X.shape[1]}")
        return X, single

    def logits(self, X) -> np.ndarray:
        X, single = self._check(X)
        z = np.tanh(X @ self.W1.T + self.b1) @ self.w2 + self.b2
        return z[0] if single else z

    def predict_proba(self, X):
        """Probability of the positive target, clamped to ``[1e-7, 1 - 1e-7]``.

        A 1-D input gives a scalar, a 2-D input one value per row.
        """
        z = self.logits(X)
        p = np.clip(_sigmoid(z), PROB_EPS, 1 - PROB_EPS)
        return float(p) if np.ndim(p) == 0 else p

    def predict(self, X, threshold: float = 0.5):
        return (np.asarray(self.predict_proba(X)) >= threshold).astype(np.int8)

    # -- parameters --------------------------------------------------------

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def with_vector(self, theta: np.ndarray) -> "ProbClassifier":
        d, h = self.input_dim, self.hidden_dim
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        return ProbClassifier(
            W1=theta[: d * h].reshape(h, d),
            b1=theta[d * h : d * h + h],
            w2=theta[d * h + h : d * h + 2 * h],
            b2=theta[-1],
            lineage=self.lineage,
        )

    def same_params(self, other: "ProbClassifier") -> bool:
        return (
            self.W1.shape == other.W1.shape
            and np.array_equal(self.W1, other.W1)
            and np.array_equal(self.b1, other.b1)
            and np.array_equal(self.w2, other.w2)
            and self.b2 == other.b2
        )

    # -- loss --------------------------------------------------------------

    def loss_and_grad(self, X, target, weight, weight_decay: float = 0.0):
        """Mean weighted BCE plus ``weight_decay * ||theta||^2`` and its gradient.

        The gradient is returned as a flat vector in ``to_vector`` order.
        """
        return _loss_and_grad(self.W1, self.b1, self.w2, self.b2, X, target, weight, weight_decay)

    def loss(self, X, target, weight, weight_decay: float = 0.0) -> float:
        return self.loss_and_grad(X, target, weight, weight_decay)[0]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _loss_and_grad(W1, b1, w2, b2, X, t, w, wd):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    H = np.tanh(X @ W1.T + b1)
    z = H @ w2 + b2
    # softplus(z) - t*z is BCE(sigmoid(z), t) without the log of a clamped value
    data = float(np.dot(w, np.logaddexp(0.0, z) - t * z) / n)
    sq = float(np.sum(W1 * W1) + np.dot(b1, b1) + np.dot(w2, w2) + b2 * b2)
    loss = data + wd * sq
    dz = w * (_sigmoid(z) - t) / n
    gw2 = H.T @ dz
    gb2 = dz.sum()
    dA = np.outer(dz, w2) * (1.0 - H * H)
    gW1 = dA.T @ X
    gb1 = dA.sum(axis=0)
    grad = np.concatenate([gW1.ravel(), gb1, gw2, [gb2]])
    if wd:
        grad = grad + 2.0 * wd * np.concatenate([W1.ravel(), b1, w2, [b2]])
    return loss, grad


# --------------------------------------------------------------------------
# Initialisation


def _draw_head(h: int, seed: int) -> tuple[np.ndarray, float]:
    g = rng(seed)
    bound = 1.0 / math.sqrt(h)
    w2 = g.uniform(-bound, bound, size=h)
    b2 = float(g.uniform(-bound, bound))
    return w2, b2


def init_model(input_dim: int, hidden_dim: int, seed: int) -> ProbClassifier:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases per layer."""
    g = rng(derive_seed(seed, 0))
    bound = 1.0 / math.sqrt(input_dim)
    W1 = g.uniform(-bound, bound, size=(hidden_dim, input_dim))
    b1 = g.uniform(-bound, bound, size=hidden_dim)
    w2, b2 = _draw_head(hidden_dim, derive_seed(seed, 1))
    return ProbClassifier(W1, b1, w2, b2, lineage=(("init", seed),))


def reinit_head(m: ProbClassifier, seed: int) -> ProbClassifier:
    """Copy of ``m`` with the body kept and the output layer redrawn under ``seed``."""
    w2, b2 = _draw_head(m.hidden_dim, derive_seed(seed, 1))
    return ProbClassifier(m.W1, m.b1, w2, b2, lineage=m.lineage + (("reinit_head", seed),))


# --------------------------------------------------------------------------
# Training


def lr_at_step(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Triangular schedule: 0 -> max_lr over the warm-up, then linearly to 0."""
    warm = cfg.warmup_steps
    if warm >= total_steps:
        raise ConfigError(f"warmup_steps ({warm}) must be smaller than total steps ({total_steps})")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if step <= warm:
        return cfg.max_lr * step / warm
    return cfg.max_lr * (total_steps - step) / (total_steps - warm)


def validation_f1(m: ProbClassifier, val: PUDataset) -> float:
    return precision_recall_f1(m.predict(val.X), val.s)[2]


def train(
    examples,
    val: Optional[PUDataset],
    cfg: TrainConfig,
    init: Optional[ProbClassifier] = None,
    *,
    head_only: bool = False,
    on_step: Optional[Callable[[int, float, float], None]] = None,
) -> ProbClassifier:
    """Mini-batch gradient descent on the weighted loss.

    After each epoch the model is scored by F1 on ``val`` (threshold 0.5,
    targets ``val.s``) and the best epoch's parameters are returned; ties go
    to the earliest epoch.  Without ``val`` the final parameters are returned.

    Rows of weight 0 carry no gradient and are left out of the batches, so
    duplicate bookkeeping does not move batch boundaries.  If every weight is
    0 the rows are kept and only weight decay acts.
    """
    if not isinstance(examples, WeightedSet):
        examples = WeightedSet.from_examples(examples)
    if len(examples) == 0:
        raise ValueError("no training examples")
    d = examples.X.shape[1]
    model = init if init is not None else init_model(d, cfg.hidden_dim, cfg.seed)
    if model.input_dim != d:
        raise IncompatibleError(f"model expects {model.input_dim} features, examples have {d}")
    if val is not None and val.dim != d:
        raise IncompatibleError(f"validation data has {val.dim} features, examples have {d}")

    keep = examples.weight > 0
    if not keep.any():
        keep[:] = True
    X, t, w = examples.X[keep], examples.target[keep], examples.weight[keep]
    n = X.shape[0]
    bs = cfg.batch_size
    per_epoch = -(-n // bs)
    total = cfg.epochs * per_epoch
    lr_at_step(0, total, cfg)  # validates warm-up against the run length

    W1, b1, w2 = model.W1.copy(), model.b1.copy(), model.w2.copy()
    b2 = model.b2
    h = model.hidden_dim
    shuffle = rng(derive_seed(cfg.seed, 2))
    lineage = model.lineage + (("train", cfg.seed),)

    best = model if val is None else None
    best_f1 = -1.0
    step = 0
    for epoch in range(cfg.epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            step += 1
            lr = lr_at_step(step, total, cfg)
            loss, grad = _loss_and_grad(W1, b1, w2, b2, X[idx], t[idx], w[idx], cfg.weight_decay)
            if not math.isfinite(loss) or not np.isfinite(grad).all():
                raise TrainingError(step, lr, loss)
            if on_step is not None:
                on_step(step, lr, loss)
            if not head_only:
                W1 -= lr * grad[: d * h].reshape(h, d)
                b1 -= lr * grad[d * h : d * h + h]
            w2 -= lr * grad[d * h + h : d * h + 2 * h]
            b2 -= lr * grad[-1]
        current = ProbClassifier(W1, b1, w2, b2, lineage=lineage)
        if val is None:
            best = current
            continue
        f1 = validation_f1(current, val)
        log.debug("epoch %d: val F1 %.4f (step %d)", epoch + 1, f1, step)
        if f1 > best_f1:
            best, best_f1 = current, f1
    return best


# --------------------------------------------------------------------------
# Serialisation


def model_to_dict(m: ProbClassifier) -> dict:
    return {
        "format": MODEL_FORMAT,
        "input_dim": m.input_dim,
        "hidden_dim": m.hidden_dim,
        "activation": "tanh",
        "output": "sigmoid",
        "seed_lineage": [[role, int(seed)] for role, seed in m.lineage],
        "body": {"weight": [float(v) for v in m.W1.ravel()], "bias": [float(v) for v in m.b1]},
        "head": {"weight": [float(v) for v in m.w2], "bias": float(m.b2)},
    }


def model_from_dict(d: dict) -> ProbClassifier:
    if d.get("format") != MODEL_FORMAT:
        raise ConfigError(f"not a {MODEL_FORMAT} document")
    din, h = int(d["input_dim"]), int(d["hidden_dim"])
    W1 = np.asarray(d["body"]["weight"], dtype=np.float64)
    if W1.size != din * h:
        raise ConfigError("body weight size does not match dimensions")
    return ProbClassifier(
        W1=W1.reshape(h, din),
        b1=d["body"]["bias"],
        w2=d["head"]["weight"],
        b2=d["head"]["bias"],
        lineage=tuple((r, s) for r, s in d.get("seed_lineage", [])),
    )


def dumps_model(m: ProbClassifier) -> str:
    # json writes floats with repr, the shortest string that reads back to the same double
    return json.dumps(model_to_dict(m), indent=1, sort_keys=True) + "\n"


def save_model(m: ProbClassifier, path) -> None:
    Path(path).write_text(dumps_model(m))


def load_model(path) -> ProbClassifier:
    return model_from_dict(json.loads(Path(path).read_text()))
