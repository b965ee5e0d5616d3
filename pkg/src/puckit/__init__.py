"""Positive-unlabelled learning with Positive Unlabelled Conversion."""

from .data import PUDataset, ScarConfig, generate_scar, load_dataset, save_dataset, split_train_val
from .evaluation import EvalReport, build_fold_plan, run_experiment
from .metrics import average_precision, mean_ap, precision_recall_f1
from .model import ProbClassifier, TrainConfig, init_model, load_model, save_model, train
from .pipeline import EnsembleModel, TrainMode, ensemble_predict, fit, pretrain_finetune, train_pn, train_pu, train_puc
from .pu import PuEstimates, estimate, estimate_c, estimate_prior, puc_convert, weight

__all__ = [
    "EnsembleModel",
    "EvalReport",
    "PUDataset",
    "ProbClassifier",
    "PuEstimates",
    "ScarConfig",
    "TrainConfig",
    "TrainMode",
    "average_precision",
    "build_fold_plan",
    "ensemble_predict",
    "estimate",
    "estimate_c",
    "estimate_prior",
    "fit",
    "generate_scar",
    "init_model",
    "load_dataset",
    "load_model",
    "mean_ap",
    "precision_recall_f1",
    "pretrain_finetune",
    "puc_convert",
    "run_experiment",
    "save_dataset",
    "save_model",
    "split_train_val",
    "train",
    "train_pn",
    "train_pu",
    "train_puc",
    "weight",
]
