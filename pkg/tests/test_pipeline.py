"""Tests for tree execution, cross-validated fitness and held-out scoring."""

import pytest
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import EvolutionConfig
from src.data.transforms import to_gray
from src.errors import SignatureMismatch
from src.gp.evolution import evolve
from src.gp.primitives import register_primitives
from src.gp.tree import parse_tree
from src.imaging.features import histogram_features
from src.learners.linear import LogisticRegression
from src.models import Dataset, Split
from src.pipeline import cache as cache_module
from src.pipeline import executor as executor_module
from src.pipeline.cache import SubtreeCache, start_generation
from src.pipeline.executor import TreeExecutor, classifier_seed, is_label_free
from src.pipeline.fitness import (
    FitnessEvaluator,
    accuracy,
    evaluate_fitness,
    fold_count,
    retrain_and_test,
)

DUPLICATED = "(Sum2 (LR (Hist Gray)) (LR (Hist Gray)))"
CASCADE = "(Sum2 (LR (CC_LR (Hist Gray))) (SVM (Comb2 (HOG Gray) (LBP Gray))))"


def bright_dark(per_class: int = 6, seed: int = 0, size: int = 8, split: Split = Split.TRAIN) -> Dataset:
    """Class 0 images are dark, class 1 images bright."""
    rng = np.random.default_rng(seed)
    dark = rng.uniform(0.0, 0.3, size=(per_class, 1, size, size))
    bright = rng.uniform(0.7, 1.0, size=(per_class, 1, size, size))
    images = np.concatenate([dark, bright]).astype(np.float32)
    labels = np.repeat([0, 1], per_class)
    return Dataset("bright_dark", split, images, labels, 2)


def constant(per_class: int, num_classes: int, split: Split = Split.TRAIN) -> Dataset:
    """Identical mid-gray images for every class, so any tree predicts one label."""
    images = np.full((per_class * num_classes, 1, 8, 8), 0.5, dtype=np.float32)
    labels = np.repeat(np.arange(num_classes), per_class)
    return Dataset("constant", split, images, labels, num_classes)


def bars(per_class: int, seed: int, split: Split, size: int = 16, noise: float = 0.1) -> Dataset:
    """Class 0 carries a vertical bar, class 1 a horizontal one, at random offsets."""
    rng = np.random.default_rng(seed)
    images = np.zeros((2 * per_class, 1, size, size))
    for i in range(2 * per_class):
        offset = int(rng.integers(2, size - 3))
        if i < per_class:
            images[i, 0, :, offset:offset + 2] = 1.0
        else:
            images[i, 0, offset:offset + 2, :] = 1.0
    images += noise * rng.standard_normal(images.shape)
    images = np.clip(images, 0.0, 1.0).astype(np.float32)
    return Dataset("bars", split, images, np.repeat([0, 1], per_class), 2)


@pytest.fixture
def registry():
    return register_primitives(1, 2)


class TestAccuracy:
    def test_percentage(self):
        assert accuracy(np.array([0, 1, 1]), np.array([0, 1, 0])) == pytest.approx(200 / 3)

    def test_empty(self):
        assert accuracy(np.array([], dtype=np.int64), np.array([], dtype=np.int64)) == 0.0

    @pytest.mark.parametrize("labels,expected", [
        ([0] * 5 + [1] * 5, 3),
        ([0, 0, 0, 0, 1, 1], 2),
        ([0, 0, 1], 1),
        ([0, 0, 0, 2, 2, 2], 3),
    ])
    def test_fold_count(self, labels, expected):
        assert fold_count(np.array(labels)) == expected


class TestFitness:
    def test_separable_data_scores_full_marks(self, registry):
        tree = parse_tree(DUPLICATED, registry)
        report = evaluate_fitness(tree, bright_dark(), seed=1)
        assert report.failure is None
        assert report.k == 3
        assert len(report.fold_accuracies) == 3
        assert report.fitness == pytest.approx(100.0)

    def test_single_instance_class_uses_training_accuracy(self, registry):
        data = bright_dark()
        data = data.take(np.array([0, 1, 2, 6]))
        report = evaluate_fitness(parse_tree(DUPLICATED, registry), data, seed=1)
        assert report.k == 1
        assert len(report.fold_accuracies) == 1
        assert report.fitness == pytest.approx(100.0)

    def test_deterministic(self, registry):
        tree = parse_tree(CASCADE, registry)
        a = evaluate_fitness(tree, bright_dark(seed=3), seed=5)
        b = evaluate_fitness(tree, bright_dark(seed=3), seed=5)
        assert a.fold_accuracies == b.fold_accuracies

    def test_folds_never_train_on_held_out_rows(self, registry, monkeypatch):
        fitted, predicted = [], []
        original_fit = TreeExecutor.fit
        original_predict = TreeExecutor.predict

        def recording_fit(self, genotype, dataset, rows=None, seed=0):
            fitted.append(np.array(rows))
            return original_fit(self, genotype, dataset, rows, seed)

        def recording_predict(self, phenotype, dataset, rows=None, trace=None):
            predicted.append(np.array(rows))
            return original_predict(self, phenotype, dataset, rows, trace)

        monkeypatch.setattr(TreeExecutor, "fit", recording_fit)
        monkeypatch.setattr(TreeExecutor, "predict", recording_predict)
        evaluate_fitness(parse_tree(DUPLICATED, registry), bright_dark(), seed=2)

        assert len(fitted) == len(predicted) == 3
        for train, held_out in zip(fitted, predicted):
            assert np.intersect1d(train, held_out).size == 0
            assert train.size + held_out.size == 12
        np.testing.assert_array_equal(np.sort(np.concatenate(predicted)), np.arange(12))

    def test_constant_prediction_scores_chance_level(self):
        data = constant(5, 4)
        report = evaluate_fitness(parse_tree(DUPLICATED, register_primitives(1, 4)), data, seed=0)
        sigma = 100.0 * np.sqrt(0.25 * 0.75 / len(data))
        assert abs(report.fitness - 25.0) <= 3 * sigma

    def test_failure_scores_zero(self, registry, monkeypatch):
        def boom(name, args):
            raise RuntimeError("primitive exploded")

        monkeypatch.setattr(executor_module, "apply_primitive", boom)
        report = evaluate_fitness(parse_tree(DUPLICATED, registry), bright_dark(), seed=0)
        assert report.fitness == 0.0
        assert "primitive exploded" in report.failure


class TestExecutor:
    def test_duplicated_branch_doubles_single_classifier(self, registry):
        data = bright_dark(seed=4)
        _, root = TreeExecutor().fit(parse_tree(DUPLICATED, registry), data, seed=0)

        X = histogram_features(to_gray(data.images))
        single = LogisticRegression(2).fit(X, data.labels, np.random.default_rng(0))
        np.testing.assert_allclose(root, 2 * single.predict_proba(X), atol=1e-12)

    def test_fit_and_predict_agree_without_out_of_fold_cascade(self, registry):
        data = bright_dark(seed=5)
        executor = TreeExecutor(cascade_oof=False)
        phenotype, fitted_root = executor.fit(parse_tree(CASCADE, registry), data, seed=3)
        _, predicted_root = executor.predict(phenotype, data)
        np.testing.assert_allclose(fitted_root, predicted_root, atol=1e-12)

    def test_every_classifier_is_fitted(self, registry):
        phenotype, _ = TreeExecutor().fit(parse_tree(CASCADE, registry), bright_dark(), seed=0)
        assert set(phenotype.classifiers) == {(0,), (0, 0), (1,)}
        assert all(clf.fitted for clf in phenotype.classifiers.values())

    def test_signature_mismatch(self, registry):
        executor = TreeExecutor()
        phenotype, _ = executor.fit(parse_tree(DUPLICATED, registry), bright_dark(), seed=0)
        with pytest.raises(SignatureMismatch):
            executor.predict(phenotype, bright_dark(size=10))

    def test_empty_rows(self, registry):
        executor = TreeExecutor()
        phenotype, _ = executor.fit(parse_tree(DUPLICATED, registry), bright_dark(), seed=0)
        labels, root = executor.predict(phenotype, bright_dark(), np.array([], dtype=np.int64))
        assert labels.shape == (0,)
        assert root.shape == (0, 2)

    def test_trace_records_feature_nodes(self, registry):
        executor = TreeExecutor()
        tree = parse_tree(CASCADE, registry)
        phenotype, _ = executor.fit(tree, bright_dark(), seed=0)
        trace = {}
        executor.predict(phenotype, bright_dark(), trace=trace)
        assert trace[(0, 0)].shape == (12, 258)
        assert trace[(1, 0)].shape[0] == 12

    def test_trace_records_every_function_node(self, registry):
        data = bright_dark()
        executor = TreeExecutor()
        phenotype, _ = executor.fit(parse_tree(CASCADE, registry), data, seed=0)
        trace = {}
        _, root = executor.predict(phenotype, data, trace=trace)
        assert set(trace) == {(), (0,), (0, 0), (0, 0, 0), (1,), (1, 0), (1, 0, 0), (1, 0, 1)}
        np.testing.assert_array_equal(trace[()], root)
        np.testing.assert_allclose(trace[(0,)].sum(axis=1), 1.0)
        assert trace[(1,)].shape == (12, 2)
        assert trace[(0, 0, 0)].shape == (12, 256)

    def test_classifier_seed(self, registry):
        tree = parse_tree(CASCADE, registry)
        left, right = tree.root.children
        assert classifier_seed(7, left) == classifier_seed(7, left)
        assert classifier_seed(7, left) != classifier_seed(7, right)
        assert classifier_seed(7, left) != classifier_seed(8, left)
        assert 0 <= classifier_seed(7, left) < 2**63

    def test_label_free(self, registry):
        tree = parse_tree(CASCADE, registry)
        svm_branch = tree.root.children[1]
        assert is_label_free(svm_branch.children[0])
        assert not is_label_free(svm_branch)
        assert not is_label_free(tree.root)


class TestCache:
    def test_cached_and_uncached_runs_are_identical(self, registry):
        tree = parse_tree(CASCADE, registry)
        data = bright_dark(seed=6)
        cache = SubtreeCache()
        plain = evaluate_fitness(tree, data, seed=4)
        cached = evaluate_fitness(tree, data, seed=4, cache=cache)
        again = evaluate_fitness(tree, data, seed=4, cache=cache)
        assert plain.fold_accuracies == cached.fold_accuracies == again.fold_accuracies
        assert cache.hits > 0

    def test_only_label_free_subtrees_are_stored(self, registry):
        data = bright_dark()
        cache = SubtreeCache()
        evaluate_fitness(parse_tree(DUPLICATED, registry), data, seed=0, cache=cache)
        assert (data.key, "(Hist Gray)") in cache
        assert (data.key, DUPLICATED) not in cache
        assert (data.key, "(LR (Hist Gray))") not in cache

    def test_lru_eviction(self):
        cache = SubtreeCache(max_entries=2)
        for key in "abc":
            cache.get_or_compute(key, lambda: np.zeros(1))
        assert len(cache) == 2
        assert "a" not in cache

    def test_byte_budget_evicts_oldest(self):
        cache = SubtreeCache(max_bytes=2 * 80)
        for key in "abc":
            cache.get_or_compute(key, lambda: np.zeros(10))
        assert len(cache) == 2
        assert "a" not in cache
        assert cache.nbytes == cache.stats()["bytes"] == 160

    def test_oversized_value_is_returned_but_not_stored(self):
        cache = SubtreeCache(max_bytes=80)
        cache.get_or_compute("small", lambda: np.zeros(10))
        value = cache.get_or_compute("big", lambda: np.zeros(11))
        assert value.shape == (11,)
        assert "big" not in cache
        assert "small" in cache
        assert cache.nbytes == 80

    def test_new_generation_empties_cache(self):
        cache = SubtreeCache()
        cache.start_generation(0)
        cache.get_or_compute("a", lambda: np.zeros(1))
        cache.start_generation(0)
        assert "a" in cache
        cache.start_generation(1)
        assert len(cache) == 0
        assert cache.nbytes == 0

    def test_process_cache_follows_generation(self, monkeypatch):
        process_cache = SubtreeCache()
        monkeypatch.setattr(cache_module, "_process_cache", process_cache)
        process_cache.get_or_compute("a", lambda: np.zeros(1))
        start_generation(3)
        assert process_cache.generation == 3
        assert len(process_cache) == 0

    def test_stored_arrays_are_read_only(self):
        cache = SubtreeCache()
        value = cache.get_or_compute("k", lambda: np.zeros(3))
        with pytest.raises(ValueError):
            value[0] = 1.0


class TestHoldout:
    def test_confusion_and_per_class(self, registry):
        train = bright_dark(seed=7)
        test = bright_dark(per_class=5, seed=8, split=Split.TEST)
        report = retrain_and_test(parse_tree(DUPLICATED, registry), train, test, seed=0)
        np.testing.assert_array_equal(report.confusion.sum(axis=1), [5, 5])
        assert report.accuracy == pytest.approx(100.0 * np.trace(report.confusion) / 10)
        assert set(report.per_class) == {0, 1}
        assert report.predictions.shape == (10,)

    def test_constant_prediction_on_balanced_test_set(self):
        registry = register_primitives(1, 10)
        train = constant(3, 10)
        test = constant(100, 10, Split.TEST)
        report = retrain_and_test(parse_tree(DUPLICATED, registry), train, test, seed=0)
        assert len(np.unique(report.predictions)) == 1
        assert report.accuracy == pytest.approx(10.0, abs=3.0)

    def test_mismatched_test_set(self, registry):
        with pytest.raises(SignatureMismatch):
            retrain_and_test(
                parse_tree(DUPLICATED, registry), bright_dark(), bright_dark(size=10, split=Split.TEST), seed=0
            )


@pytest.mark.slow
class TestParallelEvaluation:
    def test_pool_and_serial_runs_agree(self):
        data = bright_dark(seed=9)
        config = EvolutionConfig(
            population_size=6, generations=2, init_depth_min=2, init_depth_max=3, max_depth=5, seed=4,
        )
        fitness = FitnessEvaluator()
        serial = evolve(config, data, fitness, start_generation=start_generation)
        with Pool(2) as pool:
            parallel = evolve(config, data, fitness, map_fn=pool.imap, start_generation=start_generation)

        assert parallel.best.genotype.text == serial.best.genotype.text
        assert parallel.log == serial.log
        assert [ind.fitness for ind in parallel.population] == [ind.fitness for ind in serial.population]


@pytest.mark.slow
class TestSyntheticBars:
    def test_evolved_tree_separates_bar_orientations(self):
        train = bars(10, 0, Split.TRAIN)
        test = bars(100, 1, Split.TEST)
        config = EvolutionConfig(
            population_size=30, generations=10, init_depth_min=2, init_depth_max=6, max_depth=8, seed=0,
        )
        result = evolve(config, train, FitnessEvaluator(), start_generation=start_generation)
        holdout = retrain_and_test(result.best.genotype, train, test, seed=0)
        assert holdout.accuracy >= 90.0
