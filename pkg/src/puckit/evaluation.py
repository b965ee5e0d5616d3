"""Cross-validation and multi-seed evaluation.

A :class:`FoldPlan` partitions a dataset into test folds.  ``run_experiment``
trains one model per (fold, seed), scores it against gold labels and
aggregates the results into an :class:`EvalReport`.

Report conventions
------------------
* ``macro`` metrics average per-fold scores; ``micro`` metrics come from the
  confusion matrix pooled over folds.  Both are always reported.
* ``std`` is the population standard deviation (divide by N) across seeds.
* Ranking scores are ``predict_proba`` outputs.  The ensembled ranking uses
  the number of positive votes, ties broken by the members' mean probability.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import seeding
from .data import PUDataset
from .errors import ConfigError, MissingLabelsError
from .metrics import average_precision, confusion, prf_from_counts, rank_by_score
from .model import TrainConfig
from .pipeline import TrainMode, fit, vote

log = logging.getLogger(__name__)

REPORT_SCHEMA = "puckit.eval/1"
CSV_COLUMNS = ("scope", "fold", "seed", "precision", "recall", "f1", "ap", "n_test", "tp", "fp", "fn")
FOLD_KINDS = ("leave_one_group_out", "kfold")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    kind: str
    folds: tuple
    names: tuple = ()
    param: Optional[int] = None
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.folds)

    def train_ids(self, i: int, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[self.folds[i]] = False
        return np.flatnonzero(mask)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "param": self.param,
            "seed": self.seed,
            "names": list(self.names),
            "sizes": [int(f.size) for f in self.folds],
        }


def parse_fold_spec(spec: str) -> tuple[str, Optional[int]]:
    """``"kfold:7"`` -> ("kfold", 7); ``"group"`` or ``"logo"`` -> leave-one-group-out."""
    spec = spec.strip().lower()
    if spec in ("group", "groups", "logo", "leave_one_group_out"):
        return "leave_one_group_out", None
    kind, _, k = spec.partition(":")
    if kind == "kfold" and k.isdigit():
        return "kfold", int(k)
    raise ConfigError(f"bad fold spec {spec!r}; use 'kfold:K' or 'group'")


def build_fold_plan(ds: PUDataset, kind: str, param: Optional[int] = None, seed: int = 0) -> FoldPlan:
    if kind == "leave_one_group_out":
        if ds.groups is None:
            raise ConfigError("leave-one-group-out needs a group annotation per sample")
        names = tuple(sorted(set(ds.groups.tolist())))
        folds = tuple(np.flatnonzero(ds.groups == g) for g in names)
        return FoldPlan(kind, folds, names=names)
    if kind == "kfold":
        n = ds.size
        if param is None or param < 2:
            raise ConfigError("k-fold needs k >= 2")
        if param > n:
            raise ConfigError(f"k={param} exceeds the number of samples ({n})")
        perm = seeding.rng(seed).permutation(n)
        folds = tuple(np.sort(f) for f in np.array_split(perm, param))
        return FoldPlan(kind, folds, names=tuple(f"fold{i}" for i in range(param)), param=param, seed=seed)
    raise ConfigError(f"fold kind must be one of {FOLD_KINDS}, got {kind!r}")


# --------------------------------------------------------------------------
# Report


def _metrics(tp: int, fp: int, fn: int) -> dict:
    p, r, f1 = prf_from_counts(tp, fp, fn)
    return {"precision": p, "recall": r, "f1": f1}


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


@dataclass(eq=False)
class EvalReport:
    mode: str
    seeds: list
    plan: dict
    per_fold: list
    per_seed: list
    aggregate: dict
    ensembled: dict
    ranking: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "std": "population",
            "mode": self.mode,
            "seeds": list(self.seeds),
            "ranking": self.ranking,
            "plan": self.plan,
            "per_fold": self.per_fold,
            "per_seed": self.per_seed,
            "aggregate": self.aggregate,
            "ensembled": self.ensembled,
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def csv_rows(self) -> list[dict]:
        rows = [dict(scope="run", **r) for r in self.per_fold]
        for r in self.per_seed:
            rows.append(dict(scope="seed_macro", seed=r["seed"], **r["macro"]))
            rows.append(dict(scope="seed_micro", seed=r["seed"], **r["micro"]))
        for stat in ("mean", "std"):
            rows.append(dict(scope=f"macro_{stat}", **self.aggregate["macro"][stat]))
            rows.append(dict(scope=f"micro_{stat}", **self.aggregate["micro"][stat]))
        for r in self.ensembled["per_fold"]:
            rows.append(dict(scope="ensemble", **r))
        rows.append(dict(scope="ensemble_macro", **self.ensembled["macro"]))
        rows.append(dict(scope="ensemble_micro", **self.ensembled["micro"]))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {REPORT_SCHEMA}\n")
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in self.csv_rows():
            w.writerow({k: _csv_value(row.get(k)) for k in CSV_COLUMNS})
        return buf.getvalue()


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _aggregate(per_seed: list) -> dict:
    """Mean and population std across seeds for each metric present in every seed."""
    out = {}
    for view in ("macro", "micro"):
        stats = {"mean": {}, "std": {}}
        for k in ("precision", "recall", "f1", "ap"):
            vals = [r[view].get(k) for r in per_seed]
            if any(v is None for v in vals):
                continue
            stats["mean"][k], stats["std"][k] = _mean_std(vals)
        out[view] = stats
    return out


# --------------------------------------------------------------------------
# Experiment


@dataclass(frozen=True)
class _Task:
    fold: int
    seed: int


def _run_one(ds: PUDataset, plan: FoldPlan, mode: TrainMode, cfg: TrainConfig, task: _Task, label_freq):
    train_ids = plan.train_ids(task.fold, ds.size)
    test_ids = plan.folds[task.fold]
    run_cfg = replace(cfg, seed=seeding.derive_seed(task.seed, seeding.FOLDS, task.fold))
    res = fit(ds.take(train_ids), mode, run_cfg, label_freq=label_freq)
    probs = np.asarray(res.g.predict_proba(ds.X[test_ids]), dtype=np.float64)
    info = {}
    if res.estimates is not None:
        info = {"c": res.estimates.c, "prior": res.estimates.prior}
        if res.conversion is not None:
            info["n_converted"] = len(res.conversion.converted_ids)
    return task, probs, info


def _worker(args):
    return _run_one(*args)


def run_experiment(
    ds: PUDataset,
    plan: FoldPlan,
    mode: TrainMode | str,
    cfg: TrainConfig,
    seeds: Sequence[int],
    *,
    ranking: bool = False,
    jobs: int = 1,
    label_freq: Optional[float] = None,
) -> EvalReport:
    """Train and score one model per (fold, seed); gold labels come from ``ds.truth``."""
    if isinstance(mode, str):
        mode = TrainMode(mode)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("need at least one seed")
    missing = ds.missing_truth_ids()
    if missing.size:
        raise MissingLabelsError(ds.origin[missing])
    gold = ds.truth.astype(np.int8)

    tasks = [_Task(f, s) for f in range(len(plan)) for s in seeds]
    args = [(ds, plan, mode, cfg, t, label_freq) for t in tasks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_worker, args))
    else:
        outcomes = [_run_one(*a) for a in args]
    by_key = {(t.fold, t.seed): (p, info) for t, p, info in outcomes}

    per_fold = []
    counts = {}
    aps = {}
    for f in range(len(plan)):
        test_ids = plan.folds[f]
        g = gold[test_ids]
        for s in seeds:
            probs, info = by_key[(f, s)]
            preds = (probs >= 0.5).astype(np.int8)
            tp, fp, fn, _ = confusion(preds, g)
            counts[(f, s)] = (tp, fp, fn)
            ap = None
            if ranking and g.any():
                ap = average_precision(rank_by_score(probs, g))
            aps[(f, s)] = ap
            per_fold.append(
                dict(fold=f, seed=s, n_test=int(test_ids.size), tp=tp, fp=fp, fn=fn, ap=ap, **_metrics(tp, fp, fn), **info)
            )
    if ranking and not all(gold[plan.folds[f]].any() for f in range(len(plan))):
        log.warning("some folds have no gold positive; their AP is undefined and left out of mAP")

    per_seed = []
    for s in seeds:
        rows = [r for r in per_fold if r["seed"] == s]
        macro = {k: float(np.mean([r[k] for r in rows])) for k in ("precision", "recall", "f1")}
        pooled = np.sum([counts[(r["fold"], s)] for r in rows], axis=0)
        micro = _metrics(*(int(v) for v in pooled))
        fold_aps = [aps[(r["fold"], s)] for r in rows if aps[(r["fold"], s)] is not None]
        macro["ap"] = float(np.mean(fold_aps)) if fold_aps else None
        per_seed.append({"seed": s, "macro": macro, "micro": micro})

    aggregate = _aggregate(per_seed)

    ens_rows = []
    ens_counts = []
    ens_aps = []
    for f in range(len(plan)):
        g = gold[plan.folds[f]]
        member_probs = np.stack([by_key[(f, s)][0] for s in seeds])
        member_preds = (member_probs >= 0.5).astype(np.int8)
        labels = vote(member_preds)
        tp, fp, fn, _ = confusion(labels, g)
        ens_counts.append((tp, fp, fn))
        ap = None
        if ranking and g.any():
            ap = average_precision(rank_by_score(member_preds.sum(axis=0), g, tiebreak=member_probs.mean(axis=0)))
            ens_aps.append(ap)
        ens_rows.append(dict(fold=f, n_test=int(g.size), tp=tp, fp=fp, fn=fn, ap=ap, **_metrics(tp, fp, fn)))
    ens_macro = {k: float(np.mean([r[k] for r in ens_rows])) for k in ("precision", "recall", "f1")}
    ens_macro["ap"] = float(np.mean(ens_aps)) if ens_aps else None
    pooled = np.sum(ens_counts, axis=0)
    ensembled = {"per_fold": ens_rows, "macro": ens_macro, "micro": _metrics(*(int(v) for v in pooled))}

    return EvalReport(
        mode=mode.tag,
        seeds=seeds,
        plan=plan.to_dict(),
        per_fold=per_fold,
        per_seed=per_seed,
        aggregate=aggregate,
        ensembled=ensembled,
        ranking=ranking,
    )


def evaluate_models(ds: PUDataset, models: Sequence, *, ranking: bool = False) -> EvalReport:
    """Score already-trained models on all of ``ds`` as a single fold."""
    missing = ds.missing_truth_ids()
    if missing.size:
        raise MissingLabelsError(ds.origin[missing])
    if not models:
        raise ConfigError("no models to evaluate")
    plan = FoldPlan("all", (ds.ids,), names=("all",))
    gold = ds.truth.astype(np.int8)
    per_fold, per_seed, probs_all = [], [], []
    for i, m in enumerate(models):
        probs = np.asarray(m.predict_proba(ds.X), dtype=np.float64)
        probs_all.append(probs)
        tp, fp, fn, _ = confusion((probs >= 0.5).astype(np.int8), gold)
        ap = average_precision(rank_by_score(probs, gold)) if ranking and gold.any() else None
        met = _metrics(tp, fp, fn)
        per_fold.append(dict(fold=0, seed=i, n_test=ds.size, tp=tp, fp=fp, fn=fn, ap=ap, **met))
        per_seed.append({"seed": i, "macro": dict(met, ap=ap), "micro": met})
    aggregate = _aggregate(per_seed)
    member_probs = np.stack(probs_all)
    member_preds = (member_probs >= 0.5).astype(np.int8)
    tp, fp, fn, _ = confusion(vote(member_preds), gold)
    ap = None
    if ranking and gold.any():
        ap = average_precision(rank_by_score(member_preds.sum(axis=0), gold, tiebreak=member_probs.mean(axis=0)))
    met = _metrics(tp, fp, fn)
    ensembled = {
        "per_fold": [dict(fold=0, n_test=ds.size, tp=tp, fp=fp, fn=fn, ap=ap, **met)],
        "macro": dict(met, ap=ap),
        "micro": met,
    }
    return EvalReport("trained", list(range(len(models))), plan.to_dict(), per_fold, per_seed, aggregate, ensembled, ranking)
