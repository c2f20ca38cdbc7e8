__all__ = [
    "DCovKind",
    "Domain",
    "Method",
    "Metric",
    "SweepVariable",
    "CsvScenario",

    "Dataset",
    "DCovEstimate",
    "FeatureWeights",
    "dcov",
    "dcov_v2",
    "dcov_u",
    "dcov_fast",
    "pairwise_dist",
    "feature_weights",
    "estimate_feature_weights",

    "CenteredTree",
    "CenteredForest",
    "build_centered_tree",
    "build_forest",
    "predict_tree",
    "cv_select_depth",

    "CartTree",
    "CartForest",
    "SplitCandidate",
    "weighted_subset",
    "best_split",
    "build_cart_forest",
    "predict_cart",

    "CenteredConfig",
    "CartConfig",
    "StageConfig",
    "TransferConfig",

    "TransferModel",
    "SplitAssignment",
    "residualize",
    "split_target",
    "fit_tlcrf",
    "fit_tlsrf",
    "fit_method",
    "predict_transfer",

    "SimConfig",
    "f_source",
    "f_target",
    "f1_dominant",
    "f2_flat",
    "f_sparse",
    "gen_dataset",

    "CsvSchema",
    "TabularEncoder",
    "load_csv",
    "mse",
    "auc",
    "one_minus_auc",

    "ExperimentSpec",
    "SweepSpec",
    "CsvSource",
    "ResultRow",
    "run_experiment",
    "write_results",
    "summarize",

    "save_model",
    "load_model",
]

from .cart import CartForest, CartTree, SplitCandidate, best_split, build_cart_forest, predict_cart, weighted_subset
from .centered import CenteredForest, CenteredTree, build_centered_tree, build_forest, cv_select_depth, predict_tree
from .config import CartConfig, CenteredConfig, StageConfig, TransferConfig
from .dataset import Dataset
from .dcov import (
    DCovEstimate,
    FeatureWeights,
    dcov,
    dcov_fast,
    dcov_u,
    dcov_v2,
    estimate_feature_weights,
    feature_weights,
    pairwise_dist,
)
from .exceptions import *
from .experiment import CsvSource, ExperimentSpec, ResultRow, SweepSpec, run_experiment, summarize, write_results
from .kinds import *
from .metrics import auc, mse, one_minus_auc
from .records import load_model, save_model
from .simgen import SimConfig, f1_dominant, f2_flat, f_source, f_sparse, f_target, gen_dataset
from .tabular import CsvSchema, TabularEncoder, load_csv
from .transfer import (
    SplitAssignment,
    TransferModel,
    fit_method,
    fit_tlcrf,
    fit_tlsrf,
    predict_transfer,
    residualize,
    split_target,
)
