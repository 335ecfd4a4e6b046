"""Classifier factory, stratified folds, cascade augmentation and summation."""

from typing import Callable, Optional, Sequence
import logging

import numpy as np

from src.config import LearnerConfig
from src.learners.base import Classifier, Family, argmax_labels
from src.learners.forest import Forest
from src.learners.linear import LinearSVM, LogisticRegression

logger = logging.getLogger(__name__)


def make_classifier(
    family: Family,
    num_classes: int,
    config: Optional[LearnerConfig] = None,
    n_trees: Optional[int] = None,
    max_depth: Optional[int] = None,
) -> Classifier:
    """Unfitted classifier of the given family."""
    config = config or LearnerConfig()
    if family in (Family.RF, Family.ERF):
        if n_trees is None or max_depth is None:
            raise ValueError(f"{family.value} needs a tree count and a depth")
        mode = "standard" if family is Family.RF else "extra"
        return Forest(num_classes, n_trees, max_depth, mode, config.forest_min_samples_split)
    if family is Family.LR:
        return LogisticRegression(num_classes, config)
    return LinearSVM(num_classes, config)


def stratified_folds(labels: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """
    Split indices into ``k`` disjoint folds with per-class counts differing by at most one.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so fold sizes also stay balanced.
    """
    labels = np.asarray(labels)
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    position = 0
    for cls in np.unique(labels):
        members = rng.permutation(np.nonzero(labels == cls)[0])
        assignment[members] = (position + np.arange(members.size)) % k
        position = (position + members.size) % k
    return [np.sort(np.nonzero(assignment == fold)[0]) for fold in range(k)]


def out_of_fold_predictions(
    factory: Callable[[], Classifier],
    X: np.ndarray,
    y: np.ndarray,
    folds: int,
    rng: np.random.Generator,
) -> Optional[np.ndarray]:
    """
    Predictions for every training row from a model that never saw that row.

    ``factory`` builds a fresh unfitted classifier. Returns None when there are
    fewer than two rows to split.
    """
    n = X.shape[0]
    k = min(folds, n)
    if k < 2:
        return None

    out = None
    for held_out in stratified_folds(y, k, rng):
        if held_out.size == 0:
            continue
        train = np.setdiff1d(np.arange(n), held_out)
        model = factory().fit(X[train], y[train], rng)
        if out is None:
            out = np.zeros((n, model.num_classes))
        out[held_out] = model.predict_proba(X[held_out])
    return out


def cascade_transform(
    clf: Classifier,
    X: np.ndarray,
    appended: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Input features followed by class predictions: width grows by ``num_classes``."""
    block = clf.predict_proba(X) if appended is None else appended
    if block.shape != (X.shape[0], clf.num_classes):
        raise ValueError(f"prediction block {block.shape} does not match {X.shape[0]} rows")
    return np.hstack([X, block])


def sum_probabilities(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise sum of 2 to 4 probability matrices; no renormalisation."""
    if not 2 <= len(vectors) <= 4:
        raise ValueError(f"Sum takes 2 to 4 inputs, got {len(vectors)}")
    shape = vectors[0].shape
    if any(v.shape != shape for v in vectors):
        raise ValueError(f"cannot sum probability blocks of shapes {[v.shape for v in vectors]}")
    total = np.zeros(shape)
    for v in vectors:
        total = total + v
    return total


def argmax_label(v: np.ndarray) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    return int(argmax_labels(np.asarray(v)))
