"""Batch command line: ``puckit generate | train | eval``.

Each command reads one JSON config (``--config``); command-line flags
override config values.  Relative paths inside a config file resolve
against the config file's directory.

Exit codes: 0 success, 2 invalid configuration, 3 model/data dimension
mismatch, 4 missing gold labels, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import seeding
from .data import ScarConfig, generate_scar, load_dataset, save_dataset
from .errors import ConfigError, PuckitError
from .evaluation import build_fold_plan, evaluate_models, parse_fold_spec, run_experiment
from .model import TrainConfig, dumps_model, load_model
from .pipeline import TrainMode, fit

log = logging.getLogger("puckit")

MANIFEST_SCHEMA = "puckit.manifest/1"
ESTIMATES_SCHEMA = "puckit.estimates/1"


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _rel(path: Path, out: Path) -> str:
    """``path`` relative to the output directory, so manifests do not depend on
    where the experiment tree lives."""
    return Path(os.path.relpath(Path(path).resolve(), Path(out).resolve())).as_posix()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_config(path: Optional[str]) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, p.resolve().parent


def _path(value, base: Path) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _existing(value, base: Path, what: str) -> Path:
    p = _path(value, base)
    if p is None:
        raise ConfigError(f"no {what} given")
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def parse_seeds(spec) -> list[int]:
    """``"0,1,5-7"`` -> [0, 1, 5, 6, 7]; lists pass through."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        out = [int(s) for s in spec]
    else:
        out = []
        for part in str(spec).split(","):
            part = part.strip()
            if not part:
                continue
            lo, dash, hi = part.partition("-")
            try:
                out += list(range(int(lo), int(hi) + 1)) if dash else [int(lo)]
            except ValueError:
                raise ConfigError(f"bad seed list {spec!r}") from None
    if not out:
        raise ConfigError("seed list is empty")
    if any(s < 0 for s in out):
        raise ConfigError("seeds must be non-negative")
    return out


def _train_config(section: dict, seed: int) -> TrainConfig:
    if not isinstance(section, dict):
        raise ConfigError("'train' must be an object")
    try:
        return TrainConfig.from_dict({**section, "seed": seed})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _manifest(command: str, **fields) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        **fields,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


# --------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    cfg, base = _load_config(args.config)
    out = _path(args.out, Path.cwd()) or _path(cfg.pop("out", None), base) or Path.cwd()
    fmt = (args.format or cfg.pop("format", "csv")).lower()
    cfg.pop("out", None)
    cfg.pop("format", None)
    if args.seed is not None:
        cfg["seed"] = args.seed
    scar = ScarConfig.from_dict(cfg)
    ds = generate_scar(scar)
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / f"dataset.{fmt}"
    save_dataset(ds, data_path, fmt)
    meta = {
        "schema": "puckit.scar/1",
        "config": scar.to_dict(),
        "true_prior": scar.prior,
        "true_label_freq": scar.label_freq,
        "size": ds.size,
        "dim": ds.dim,
        "n_labelled": int(ds.labelled_ids.size),
        "n_positive": int(ds.truth.sum()),
        "fingerprint": ds.fingerprint(),
        "dataset": data_path.name,
    }
    _write(out / "dataset.meta.json", _dump(meta))
    print(f"wrote {data_path} ({ds.size} samples, {int(ds.labelled_ids.size)} labelled)")
    return 0


def _common_run_inputs(args, cfg: dict, base: Path):
    data_path = _existing(args.dataset or cfg.get("dataset"), Path.cwd() if args.dataset else base, "dataset")
    mode_tag = (args.mode or cfg.get("mode") or "puc").upper()
    pre_value = args.pretrained or cfg.get("pretrained")
    pre_path = None
    if pre_value:
        pre_path = _existing(pre_value, Path.cwd() if args.pretrained else base, "pretrained model")
    label_freq = args.label_freq if args.label_freq is not None else cfg.get("label_freq")
    ds = load_dataset(data_path)
    transfer = load_model(pre_path) if pre_path else None
    mode = TrainMode(mode_tag, transfer=transfer)
    return data_path, ds, mode, pre_path, label_freq


def cmd_train(args) -> int:
    cfg, base = _load_config(args.config)
    out = _path(args.out, Path.cwd()) or _path(cfg.get("out"), base) or Path.cwd()
    seed = parse_seeds(args.seeds)[0] if args.seeds else int(cfg.get("seed", 0))
    data_path, ds, mode, pre_path, label_freq = _common_run_inputs(args, cfg, base)
    tcfg = _train_config(cfg.get("train", {}), seed)

    res = fit(ds, mode, tcfg, label_freq=label_freq)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"g": _write(out / "g.json", dumps_model(res.g)).name}
    summary = {}
    if res.f is not None:
        outputs["f"] = _write(out / "f.json", dumps_model(res.f)).name
        origin = res.train_origin
        est = {
            "schema": ESTIMATES_SCHEMA,
            "mode": res.mode,
            **res.estimates.to_dict(origin),
            "label_freq_source": "given" if label_freq is not None else "estimated",
            "split": {"train_ids": res.split.train_ids.tolist(), "val_ids": res.split.val_ids.tolist()},
        }
        summary = {"c": res.estimates.c, "prior": res.estimates.prior}
        if res.conversion is not None:
            est["conversion"] = res.conversion.to_dict(origin)
            summary["n_converted"] = len(res.conversion.converted_ids)
        outputs["estimates"] = _write(out / "estimates.json", _dump(est)).name
        if not args.no_figures:
            from .plotting import plot_weights

            fig = plot_weights(res.estimates, res.conversion, out / "weights.png")
            if fig is not None:
                outputs["figures"] = [fig.name]

    manifest = _manifest(
        "train",
        mode=res.mode,
        seed=seed,
        train_config=tcfg.to_dict(),
        label_freq=label_freq,
        dataset={"path": _rel(data_path, out), "fingerprint": ds.fingerprint(), "size": ds.size, "dim": ds.dim},
        pretrained=None if pre_path is None else {"path": _rel(pre_path, out), "sha256": _sha256(pre_path)},
        outputs=outputs,
        summary=summary,
    )
    _write(out / "manifest.json", _dump(manifest))
    print(f"{res.mode} model written to {out / 'g.json'}" + "".join(f", {k}={v:.4g}" for k, v in summary.items()))
    return 0


def cmd_eval(args) -> int:
    cfg, base = _load_config(args.config)
    out = _path(args.out, Path.cwd()) or _path(cfg.get("out"), base) or Path.cwd()
    top_seed = int(cfg.get("seed", 0))
    ranking = bool(args.ranking or cfg.get("ranking", False))
    jobs = args.jobs or int(cfg.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")

    models = cfg.get("models")
    if args.models:
        models, mbase = args.models, Path.cwd()
    else:
        mbase = base
    if models:
        data_path = _existing(args.dataset or cfg.get("dataset"), Path.cwd() if args.dataset else base, "dataset")
        ds = load_dataset(data_path)
        paths = [_existing(m, mbase, "model") for m in models]
        report = evaluate_models(ds, [load_model(p) for p in paths], ranking=ranking)
        extra = {"models": [_rel(p, out) for p in paths]}
        seeds, mode_tag = report.seeds, "trained"
    else:
        data_path, ds, mode, pre_path, label_freq = _common_run_inputs(args, cfg, base)
        if args.seeds:
            seeds = parse_seeds(args.seeds)
        elif "seeds" in cfg:
            seeds = parse_seeds(cfg["seeds"])
        else:
            n = int(cfg.get("n_seeds", 15))
            seeds = [seeding.derive_seed(top_seed, 100, i) for i in range(n)]
        folds = args.folds or cfg.get("folds", "kfold:5")
        if isinstance(folds, dict):
            kind, param = folds.get("kind"), folds.get("k")
        else:
            kind, param = parse_fold_spec(str(folds))
        plan = build_fold_plan(ds, kind, param, seed=seeding.derive_seed(top_seed, seeding.FOLDS))
        tcfg = _train_config(cfg.get("train", {}), top_seed)
        report = run_experiment(ds, plan, mode, tcfg, seeds, ranking=ranking, jobs=jobs, label_freq=label_freq)
        extra = {"train_config": tcfg.to_dict(), "label_freq": label_freq}
        if pre_path is not None:
            extra["pretrained"] = {"path": _rel(pre_path, out), "sha256": _sha256(pre_path)}
        mode_tag = mode.tag

    out.mkdir(parents=True, exist_ok=True)
    outputs = {
        "report_json": _write(out / "report.json", report.to_json()).name,
        "report_csv": _write(out / "report.csv", report.to_csv()).name,
    }
    if not args.no_figures:
        from .plotting import plot_eval_report

        outputs["figures"] = [p.name for p in plot_eval_report(report, out)]
    manifest = _manifest(
        "eval",
        mode=mode_tag,
        seed=top_seed,
        seeds=list(seeds),
        ranking=ranking,
        dataset={"path": _rel(data_path, out), "fingerprint": ds.fingerprint(), "size": ds.size, "dim": ds.dim},
        outputs=outputs,
        **extra,
    )
    _write(out / "manifest.json", _dump(manifest))
    agg = report.aggregate["macro"]["mean"]
    line = ", ".join(f"{k}={v:.4f}" for k, v in agg.items())
    print(f"{mode_tag}: {len(report.per_fold)} runs; mean {line}; report in {out}")
    return 0


# --------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="puckit", description="PU / PUC learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic SCAR dataset")
    g.add_argument("--config", required=True, help="ScarConfig JSON")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, help="override the generator seed")
    g.add_argument("--format", choices=["csv", "jsonl"])
    g.set_defaults(func=cmd_generate)

    for name, func, help_ in (
        ("train", cmd_train, "train f and g on a dataset"),
        ("eval", cmd_eval, "cross-validated multi-seed evaluation"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="run config JSON")
        p.add_argument("--dataset", help="dataset path (CSV or JSONL)")
        p.add_argument("--mode", choices=["pn", "pu", "puc"], type=str.lower)
        p.add_argument("--pretrained", help="serialized source model to warm-start g")
        p.add_argument("--seeds", help="seed list, e.g. '0,1,2' or '0-14'")
        p.add_argument("--label-freq", type=float, help="use this c instead of estimating it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        p.set_defaults(func=func)
        if name == "eval":
            p.add_argument("--folds", help="'kfold:K' or 'group'")
            p.add_argument("--ranking", action="store_true", help="report AP per fold and mAP")
            p.add_argument("--jobs", type=int, help="worker processes")
            p.add_argument("--models", nargs="+", help="evaluate these trained models instead of training")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("PUCKIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PuckitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
