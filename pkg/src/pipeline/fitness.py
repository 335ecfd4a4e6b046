"""Cross-validated fitness and final train/test evaluation."""

from dataclasses import dataclass, field
from typing import Optional
import logging
import time

import numpy as np

from src.config import LearnerConfig
from src.errors import EdlgpError
from src.models import Dataset, FitnessReport
from src.gp.tree import GenotypeTree
from src.learners.ensemble import stratified_folds
from src.pipeline.cache import SubtreeCache, get_cache
from src.pipeline.executor import PhenotypeTree, TreeExecutor

logger = logging.getLogger(__name__)

MAX_FOLDS = 3
_FOLD_STREAM = 0xF01D


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Percentage of correctly classified instances."""
    if truth.size == 0:
        return 0.0
    return 100.0 * float(np.count_nonzero(predicted == truth)) / truth.size


def fold_count(labels: np.ndarray) -> int:
    """min(3, nc) where nc is the size of the smallest present class."""
    counts = np.bincount(labels)
    smallest = int(counts[counts > 0].min())
    return min(MAX_FOLDS, smallest)


def evaluate_fitness(
    genotype: GenotypeTree,
    dataset: Dataset,
    seed: int,
    cascade_oof: bool = True,
    learner_config: Optional[LearnerConfig] = None,
    cache: Optional[SubtreeCache] = None,
) -> FitnessReport:
    """
    Mean held-out accuracy over stratified k folds, k = min(3, nc).

    With a single instance in some class the tree is fitted on everything and
    the training accuracy is reported. Execution failures give fitness 0 with
    the failure recorded instead of raising.
    """
    started = time.perf_counter()
    executor = TreeExecutor(learner_config, cascade_oof, cache=cache)
    labels = dataset.labels
    k = fold_count(labels)

    try:
        if k == 1:
            phenotype, root = executor.fit(genotype, dataset, seed=seed)
            fold_accuracies = [accuracy(np.argmax(root, axis=1), labels)]
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed, _FOLD_STREAM]))
            everything = np.arange(len(dataset))
            fold_accuracies = []
            for held_out in stratified_folds(labels, k, rng):
                train = np.setdiff1d(everything, held_out)
                phenotype, _ = executor.fit(genotype, dataset, train, seed=seed)
                predicted, _ = executor.predict(phenotype, dataset, held_out)
                fold_accuracies.append(accuracy(predicted, labels[held_out]))
    except EdlgpError as e:
        return FitnessReport(
            fitness=0.0, k=k, wall_time=time.perf_counter() - started, failure=str(e)
        )

    return FitnessReport(
        fitness=float(np.mean(fold_accuracies)),
        fold_accuracies=fold_accuracies,
        k=k,
        wall_time=time.perf_counter() - started,
    )


class FitnessEvaluator:
    """
    Picklable fitness function for the evolution loop.

    The subtree cache is looked up in the worker process at call time so every
    process keeps its own.
    """

    def __init__(self, learner_config: Optional[LearnerConfig] = None, cascade_oof: bool = True):
        self.learner_config = learner_config or LearnerConfig()
        self.cascade_oof = cascade_oof

    def __call__(self, genotype: GenotypeTree, dataset: Dataset, seed: int) -> FitnessReport:
        return evaluate_fitness(
            genotype, dataset, seed,
            cascade_oof=self.cascade_oof,
            learner_config=self.learner_config,
            cache=get_cache(),
        )


@dataclass
class HoldoutReport:
    """Accuracy of a retrained tree on held-out test data."""
    accuracy: float
    per_class: dict[int, float] = field(default_factory=dict)
    confusion: Optional[np.ndarray] = None
    predictions: Optional[np.ndarray] = None
    train_time: float = 0.0
    test_time: float = 0.0
    phenotype: Optional[PhenotypeTree] = field(default=None, repr=False)


def per_class_accuracy(predicted: np.ndarray, truth: np.ndarray, num_classes: int) -> dict[int, float]:
    result = {}
    for cls in range(num_classes):
        mask = truth == cls
        if mask.any():
            result[cls] = accuracy(predicted[mask], truth[mask])
    return result


def confusion_matrix(predicted: np.ndarray, truth: np.ndarray, num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (truth, predicted), 1)
    return matrix


def retrain_and_test(
    genotype: GenotypeTree,
    train: Dataset,
    test: Dataset,
    seed: int,
    cascade_oof: bool = True,
    learner_config: Optional[LearnerConfig] = None,
    cache: Optional[SubtreeCache] = None,
) -> HoldoutReport:
    """
    Fit on the whole training set and score the test set.

    Raises:
        ExecutionError: a primitive failed while fitting or predicting
        SignatureMismatch: test data does not match the training signature
    """
    executor = TreeExecutor(learner_config, cascade_oof, cache=cache)
    started = time.perf_counter()
    phenotype, _ = executor.fit(genotype, train, seed=seed)
    fitted = time.perf_counter()
    predicted, _ = executor.predict(phenotype, test)
    finished = time.perf_counter()

    num_classes = train.num_classes
    report = HoldoutReport(
        accuracy=accuracy(predicted, test.labels),
        per_class=per_class_accuracy(predicted, test.labels, num_classes),
        confusion=confusion_matrix(predicted, test.labels, num_classes),
        predictions=predicted,
        train_time=fitted - started,
        test_time=finished - fitted,
        phenotype=phenotype,
    )
    logger.info("Test accuracy %.2f%% on %d instances", report.accuracy, len(test))
    return report
