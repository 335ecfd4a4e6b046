"""Classifier primitives: forests, linear models and ensemble helpers."""

from src.learners.base import Classifier, Family, argmax_labels
from src.learners.forest import DecisionTree, Forest, fit_decision_tree, fit_forest
from src.learners.linear import (
    LinearSVM,
    LogisticRegression,
    fit_linear_svm,
    fit_logistic_regression,
)
from src.learners.ensemble import (
    argmax_label,
    cascade_transform,
    make_classifier,
    out_of_fold_predictions,
    stratified_folds,
    sum_probabilities,
)

__all__ = [
    "Classifier",
    "Family",
    "argmax_labels",
    "DecisionTree",
    "Forest",
    "fit_decision_tree",
    "fit_forest",
    "LinearSVM",
    "LogisticRegression",
    "fit_linear_svm",
    "fit_logistic_regression",
    "argmax_label",
    "cascade_transform",
    "make_classifier",
    "out_of_fold_predictions",
    "stratified_folds",
    "sum_probabilities",
]
