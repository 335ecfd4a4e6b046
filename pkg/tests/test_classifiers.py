"""Tests for the classifier primitives, fold splitting and ensemble helpers."""

import pytest
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import LearnerConfig
from src.learners import ensemble as ensemble_module
from src.learners.base import Classifier, Family, Standardizer, one_hot
from src.learners.ensemble import (
    argmax_label,
    cascade_transform,
    make_classifier,
    out_of_fold_predictions,
    stratified_folds,
    sum_probabilities,
)
from src.learners.forest import Forest, fit_decision_tree
from src.learners.linear import LinearSVM, LogisticRegression, softmax_loss_and_gradient


def blobs(seed: int, per_class: int = 30):
    """Three well-separated Gaussian clusters in 4 dimensions."""
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0, 0, 0], [4, 4, 0, 0], [0, 4, 4, 4]], dtype=np.float64)
    X = np.concatenate([c + 0.5 * rng.standard_normal((per_class, 4)) for c in centres])
    y = np.repeat(np.arange(3), per_class)
    return X, y


def xor(seed: int, per_corner: int = 20):
    rng = np.random.default_rng(seed)
    corners = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=np.float64)
    X = np.concatenate([c + 0.15 * rng.standard_normal((per_corner, 2)) for c in corners])
    y = np.repeat([0, 1, 1, 0], per_corner)
    return X, y


def build(family: Family) -> Classifier:
    if family in (Family.RF, Family.ERF):
        return make_classifier(family, 3, n_trees=20, max_depth=5)
    return make_classifier(family, 3)


class TestFamilies:
    @pytest.mark.parametrize("family", list(Family))
    def test_separates_blobs(self, family):
        X_train, y_train = blobs(0)
        X_test, y_test = blobs(1)
        clf = build(family).fit(X_train, y_train, np.random.default_rng(0))
        assert clf.family is family
        assert (clf.predict(X_test) == y_test).mean() >= 0.9

    @pytest.mark.parametrize("family", list(Family))
    def test_probability_rows(self, family):
        X, y = blobs(2)
        probs = build(family).fit(X, y, np.random.default_rng(1)).predict_proba(X)
        assert probs.shape == (90, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert (probs >= 0).all()

    @pytest.mark.parametrize("family", list(Family))
    def test_single_class_training(self, family):
        X = np.random.default_rng(3).random((10, 4))
        clf = build(family).fit(X, np.full(10, 2), np.random.default_rng(0))
        np.testing.assert_array_equal(clf.predict(X), 2)

    @pytest.mark.parametrize("family", list(Family))
    def test_same_seed_same_model(self, family):
        X, y = blobs(4)
        a = build(family).fit(X, y, np.random.default_rng(9)).predict_proba(X)
        b = build(family).fit(X, y, np.random.default_rng(9)).predict_proba(X)
        np.testing.assert_array_equal(a, b)

    def test_predict_before_fit(self):
        with pytest.raises(RuntimeError):
            LogisticRegression(3).predict(np.zeros((2, 4)))

    def test_wrong_width(self):
        X, y = blobs(5)
        clf = LogisticRegression(3).fit(X, y, np.random.default_rng(0))
        with pytest.raises(ValueError):
            clf.predict(np.zeros((2, 5)))

    def test_empty_training_set(self):
        with pytest.raises(ValueError):
            LinearSVM(3).fit(np.zeros((0, 4)), np.zeros(0, dtype=np.int64), np.random.default_rng(0))

    def test_forest_needs_size(self):
        with pytest.raises(ValueError):
            make_classifier(Family.RF, 3)


class TestForests:
    @pytest.mark.parametrize("mode", ["standard", "extra"])
    def test_xor(self, mode):
        """Depth-limited forests still learn XOR; counted over many seeds."""
        solved = 0
        for seed in range(25):
            X_train, y_train = xor(seed)
            X_test, y_test = xor(seed + 100)
            forest = Forest(2, 10, 6, mode).fit(X_train, y_train, np.random.default_rng(seed))
            solved += (forest.predict(X_test) == y_test).mean() >= 0.9
        assert solved >= 20

    @pytest.mark.parametrize("mode", ["standard", "extra"])
    def test_replicated_xor_truth_table(self, mode):
        X = np.tile(np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=np.float64), (25, 1))
        y = np.tile([0, 0, 1, 1], 25)
        for seed in range(10):
            tree = fit_decision_tree(X, y, 2, mode, np.random.default_rng(seed))
            predicted = np.argmax(tree.predict_proba(X), axis=1)
            np.testing.assert_array_equal(predicted, y)

    def test_one_split_separates_a_line(self):
        X = np.arange(10, dtype=np.float64)[:, None]
        y = (X[:, 0] >= 4).astype(np.int64)
        tree = fit_decision_tree(X, y, 1, "standard", np.random.default_rng(0))
        assert tree.threshold[0] == pytest.approx(3.5)
        np.testing.assert_array_equal(np.argmax(tree.predict_proba(X), axis=1), y)

    @pytest.mark.parametrize("max_depth", [1, 2, 4])
    def test_depth_limit(self, max_depth):
        X, y = blobs(6)
        tree = fit_decision_tree(X, y, max_depth, "standard", np.random.default_rng(0))
        assert tree.depth <= max_depth

    def test_pure_node_is_leaf(self):
        X = np.random.default_rng(7).random((12, 3))
        tree = fit_decision_tree(X, np.zeros(12, dtype=np.int64), 5, "standard",
                                 np.random.default_rng(0), num_classes=2)
        assert tree.node_count == 1
        np.testing.assert_array_equal(tree.value[0], [1.0, 0.0])

    def test_family_follows_mode(self):
        assert Forest(2, 1, 1, "standard").family is Family.RF
        assert Forest(2, 1, 1, "extra").family is Family.ERF


class TestLinear:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((15, 4))
        Y = one_hot(rng.integers(0, 3, size=15), 3)
        W = 0.3 * rng.standard_normal((4, 3))
        b = 0.1 * rng.standard_normal(3)
        _, gW, gb = softmax_loss_and_gradient(W, b, X, Y, 0.05)

        eps = 1e-6
        for i in range(4):
            for j in range(3):
                up, down = W.copy(), W.copy()
                up[i, j] += eps
                down[i, j] -= eps
                numeric = (softmax_loss_and_gradient(up, b, X, Y, 0.05)[0]
                           - softmax_loss_and_gradient(down, b, X, Y, 0.05)[0]) / (2 * eps)
                assert gW[i, j] == pytest.approx(numeric, abs=1e-6)
        for j in range(3):
            up, down = b.copy(), b.copy()
            up[j] += eps
            down[j] -= eps
            numeric = (softmax_loss_and_gradient(W, up, X, Y, 0.05)[0]
                       - softmax_loss_and_gradient(W, down, X, Y, 0.05)[0]) / (2 * eps)
            assert gb[j] == pytest.approx(numeric, abs=1e-6)

    def test_loss_never_increases(self):
        X, y = blobs(8)
        clf = LogisticRegression(3, LearnerConfig(lr_max_epochs=100)).fit(X, y, np.random.default_rng(0))
        history = np.array(clf.loss_history)
        assert len(history) > 1
        assert (np.diff(history) <= 0).all()

    def test_svm_outputs_one_hot(self):
        X, y = blobs(9)
        probs = LinearSVM(3).fit(X, y, np.random.default_rng(0)).predict_proba(X)
        assert set(np.unique(probs)) <= {0.0, 1.0}
        np.testing.assert_array_equal(probs.sum(axis=1), 1.0)

    def test_standardizer_zero_variance(self):
        X = np.array([[1.0, 5.0], [3.0, 5.0]])
        out = Standardizer().fit(X).transform(X)
        np.testing.assert_allclose(out, [[-1.0, 0.0], [1.0, 0.0]])


class _Memorizer(Classifier):
    """Predicts class 1 for rows it was trained on, class 0 otherwise (row id in column 0)."""

    family = Family.LR

    def _fit(self, X, y, rng):
        self.seen = set(X[:, 0].astype(int))

    def _predict_proba(self, X):
        return one_hot(np.array([int(i in self.seen) for i in X[:, 0].astype(int)]), 2)


class TestFolds:
    def test_stratified_balance(self):
        labels = np.repeat([0, 1, 2], [7, 5, 3])
        folds = stratified_folds(labels, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(15))
        for cls in range(3):
            counts = [int((labels[f] == cls).sum()) for f in folds]
            assert max(counts) - min(counts) <= 1
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_out_of_fold_rows_are_unseen(self):
        X = np.arange(12, dtype=np.float64)[:, None]
        y = np.repeat([0, 1], 6)
        oof = out_of_fold_predictions(lambda: _Memorizer(2), X, y, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(oof[:, 0], 1.0)

    def test_held_out_labels_never_reach_their_predictions(self, monkeypatch):
        """Relabelling one fold leaves that fold's out-of-fold rows untouched."""
        X, y = blobs(12)
        folds = [np.arange(start, 90, 3) for start in range(3)]
        monkeypatch.setattr(ensemble_module, "stratified_folds", lambda labels, k, rng: folds)

        def factory():
            return LogisticRegression(3)

        before = out_of_fold_predictions(factory, X, y, 3, np.random.default_rng(0))
        relabelled = y.copy()
        relabelled[folds[0]] = (relabelled[folds[0]] + 1) % 3
        after = out_of_fold_predictions(factory, X, relabelled, 3, np.random.default_rng(0))

        np.testing.assert_array_equal(before[folds[0]], after[folds[0]])
        assert not np.array_equal(before[folds[1]], after[folds[1]])

    def test_out_of_fold_needs_two_rows(self):
        X = np.zeros((1, 2))
        assert out_of_fold_predictions(lambda: _Memorizer(2), X, np.zeros(1, dtype=np.int64), 3,
                                       np.random.default_rng(0)) is None


class TestEnsembleHelpers:
    def test_cascade_width(self):
        X, y = blobs(10)
        clf = LogisticRegression(3).fit(X, y, np.random.default_rng(0))
        out = cascade_transform(clf, X)
        assert out.shape == (90, 7)
        np.testing.assert_array_equal(out[:, :4], X)

    def test_cascade_uses_supplied_block(self):
        X, y = blobs(10)
        clf = LogisticRegression(3).fit(X, y, np.random.default_rng(0))
        block = np.full((90, 3), 0.25)
        np.testing.assert_array_equal(cascade_transform(clf, X, block)[:, 4:], 0.25)
        with pytest.raises(ValueError):
            cascade_transform(clf, X, np.zeros((89, 3)))

    def test_sum_probabilities(self):
        a = np.array([[0.2, 0.8]])
        b = np.array([[0.6, 0.4]])
        np.testing.assert_allclose(sum_probabilities([a, b]), [[0.8, 1.2]])

    def test_sum_arity_and_shape(self):
        a = np.zeros((2, 3))
        with pytest.raises(ValueError):
            sum_probabilities([a])
        with pytest.raises(ValueError):
            sum_probabilities([a] * 5)
        with pytest.raises(ValueError):
            sum_probabilities([a, np.zeros((2, 4))])

    def test_argmax_ties_go_low(self):
        assert argmax_label(np.array([0.5, 0.5, 0.1])) == 0
        assert argmax_label(np.array([0.1, 0.7, 0.7])) == 1
