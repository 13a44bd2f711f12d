"""Training stack: synthetic icons, feature pools, boosting, cascades."""

from facescan.classifier.boosting import RoundPick, WeakClassifier, adaboost, boost_rounds, stump_predict
from facescan.classifier.cascade import (
    Cascade,
    CascadeStage,
    classify_window,
    eval_at_origins,
    eval_patches,
)
from facescan.classifier.features import Feature, FeaturePool, bbf_pool, enumerate_haar_features, haar_pool
from facescan.classifier.icons import IconParams, generate_face_icons, sample_negatives, stylized_params, vary_seed
from facescan.classifier.model_io import dumps_model, load_model, parses_model, save_model
from facescan.classifier.stumps import best_stump, train_stump
from facescan.classifier.training import (
    CascadeTargets,
    MiningResult,
    NegativeSource,
    StageReport,
    TrainConfig,
    TrainReport,
    train_cascade,
)

__all__ = [
    "Cascade",
    "CascadeStage",
    "CascadeTargets",
    "Feature",
    "FeaturePool",
    "IconParams",
    "MiningResult",
    "NegativeSource",
    "RoundPick",
    "StageReport",
    "TrainConfig",
    "TrainReport",
    "WeakClassifier",
    "adaboost",
    "bbf_pool",
    "best_stump",
    "boost_rounds",
    "classify_window",
    "dumps_model",
    "enumerate_haar_features",
    "eval_at_origins",
    "eval_patches",
    "generate_face_icons",
    "haar_pool",
    "load_model",
    "parses_model",
    "sample_negatives",
    "save_model",
    "stump_predict",
    "stylized_params",
    "train_cascade",
    "train_stump",
    "vary_seed",
]
