"""Benchmarking harness: classifiers, folds, selection, experiment drivers."""

from .evaluate import EvalReport, confusion_report, evaluate, roc_points
from .experiments import (
    AugmentationResult,
    EvasionResult,
    augmentation_experiment,
    cv_experiment,
    evasion_experiment,
    resolve_classifier,
    rows_to_matrix,
)
from .ffs import forward_feature_selection
from .folds import Split, stratified_kfold
from .nb_kde import NaiveBayesKde
from .subsets import FFS_SUBSETS, builtin_subset, replication_exclusions
from .tree import GiniTree

__all__ = [
    "AugmentationResult",
    "EvalReport",
    "EvasionResult",
    "FFS_SUBSETS",
    "GiniTree",
    "NaiveBayesKde",
    "Split",
    "augmentation_experiment",
    "builtin_subset",
    "confusion_report",
    "cv_experiment",
    "evaluate",
    "evasion_experiment",
    "forward_feature_selection",
    "replication_exclusions",
    "resolve_classifier",
    "roc_points",
    "rows_to_matrix",
    "stratified_kfold",
]
