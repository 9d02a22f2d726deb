"""Tabular missing-data imputation with a mask-attention denoising autoencoder."""

from .baselines import DaeModel, MeanImputer, mean_impute
from .errors import DaemaError
from .evalharness import ExperimentConfig, ExperimentReport, checkpoint_average, nrms, run_experiment
from .forest import ForestConfig, downstream_score, fit_forest, fit_tree
from .missingness import MaskedDataset, apply_mask, artificial_mask, mcar_mask, mnar_mask
from .model import DaemaModel, attend, decode, encode_features, impute, masked_loss, select_features
from .pipeline import Dataset, clean, load_csv, split, znormalize
from .training import TrainConfig, train

__all__ = [
    "DaeModel", "DaemaError", "DaemaModel", "Dataset", "ExperimentConfig", "ExperimentReport",
    "ForestConfig", "MaskedDataset", "MeanImputer", "TrainConfig", "apply_mask", "artificial_mask",
    "attend", "checkpoint_average", "clean", "decode", "downstream_score", "encode_features",
    "fit_forest", "fit_tree", "impute", "load_csv", "masked_loss", "mcar_mask", "mean_impute",
    "mnar_mask", "nrms", "run_experiment", "select_features", "split", "train", "znormalize",
]
