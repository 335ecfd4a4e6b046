"""Decision trees, random forests and extremely randomised trees."""

from dataclasses import dataclass
from typing import Literal
import math

import numpy as np

from src.learners.base import Classifier, Family

SplitMode = Literal["standard", "extra"]


@dataclass
class DecisionTree:
    """
    Array-backed binary tree. Node ``i`` sends ``x[feature[i]] <= threshold[i]``
    to ``left[i]``; leaves have ``feature == -1`` and carry a class distribution.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            current = node[idx]
            goes_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(goes_left, self.left[current], self.right[current])
            active = self.feature[node] >= 0
        return self.value[node]


def _gini_from_counts(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1)
    safe = np.where(totals > 0, totals, 1)
    p = counts / safe[..., None]
    return 1.0 - (p ** 2).sum(axis=-1)


def _best_standard_split(x: np.ndarray, onehot: np.ndarray) -> tuple[float, float] | None:
    """Best (weighted gini, threshold) over midpoints of sorted unique values."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
    if boundaries.size == 0:
        return None
    cum = np.cumsum(onehot[order], axis=0)
    total = cum[-1]
    left = cum[boundaries]
    right = total - left
    n_left = (boundaries + 1).astype(np.float64)
    n_right = x.shape[0] - n_left
    score = (n_left * _gini_from_counts(left) + n_right * _gini_from_counts(right)) / x.shape[0]
    best = int(np.argmin(score))
    b = boundaries[best]
    return float(score[best]), float((xs[b] + xs[b + 1]) / 2)


def _extra_split(
    x: np.ndarray, onehot: np.ndarray, rng: np.random.Generator
) -> tuple[float, float] | None:
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return None
    threshold = float(rng.uniform(lo, hi))
    mask = x <= threshold
    n_left = mask.sum()
    if n_left == 0 or n_left == x.shape[0]:
        return None
    left = onehot[mask].sum(axis=0)
    right = onehot[~mask].sum(axis=0)
    score = (n_left * _gini_from_counts(left) + (x.shape[0] - n_left) * _gini_from_counts(right))
    return float(score / x.shape[0]), threshold


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    mode: SplitMode,
    rng: np.random.Generator,
    num_classes: int | None = None,
    min_samples_split: int = 2,
) -> DecisionTree:
    """
    Greedy Gini tree.

    Each node examines sqrt(dim) randomly ordered non-constant features. In
    ``standard`` mode every midpoint threshold is scored, in ``extra`` mode one
    uniform threshold per feature. Growth stops on purity, at ``max_depth`` or
    below ``min_samples_split`` samples.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a decision tree on no samples")
    num_classes = num_classes or int(y.max()) + 1
    onehot = np.eye(num_classes)[y]
    n_features = X.shape[1]
    max_features = max(1, int(math.sqrt(n_features)))

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def new_node(indices: np.ndarray) -> int:
        counts = onehot[indices].sum(axis=0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        return len(feature) - 1

    root = new_node(np.arange(X.shape[0]))
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, indices, depth = stack.pop()
        if depth >= max_depth or indices.size < min_samples_split:
            continue
        if np.count_nonzero(value[node]) <= 1:
            continue

        best: tuple[float, int, float] | None = None
        examined = 0
        for f in rng.permutation(n_features):
            if examined >= max_features:
                break
            column = X[indices, f]
            if mode == "standard":
                found = _best_standard_split(column, onehot[indices])
            else:
                found = _extra_split(column, onehot[indices], rng)
            if found is None:
                continue
            examined += 1
            if best is None or found[0] < best[0]:
                best = (found[0], int(f), found[1])

        if best is None:
            continue
        _, f, thr = best
        mask = X[indices, f] <= thr
        left_idx, right_idx = indices[mask], indices[~mask]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


class Forest(Classifier):
    """
    Ensemble of ``n_trees`` trees of depth at most ``max_depth``.

    ``standard`` (RF) trains each tree on a bootstrap resample, ``extra`` (ERF)
    on the full sample. Prediction is the mean of the leaf distributions.
    """

    def __init__(
        self,
        num_classes: int,
        n_trees: int,
        max_depth: int,
        mode: SplitMode = "standard",
        min_samples_split: int = 2,
    ):
        super().__init__(num_classes)
        if n_trees < 1:
            raise ValueError("a forest needs at least one tree")
        self.family = Family.RF if mode == "standard" else Family.ERF
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.mode = mode
        self.min_samples_split = min_samples_split
        self.trees: list[DecisionTree] = []

    def _fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None:
        n = X.shape[0]
        seeds = rng.integers(0, 2**63 - 1, size=self.n_trees)
        self.trees = []
        for seed in seeds:
            tree_rng = np.random.default_rng(int(seed))
            if self.mode == "standard":
                sample = tree_rng.integers(0, n, size=n)
            else:
                sample = np.arange(n)
            self.trees.append(fit_decision_tree(
                X[sample], y[sample], self.max_depth, self.mode, tree_rng,
                num_classes=self.num_classes, min_samples_split=self.min_samples_split,
            ))

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros((X.shape[0], self.num_classes))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    max_depth: int,
    mode: SplitMode,
    rng: np.random.Generator,
    num_classes: int | None = None,
) -> Forest:
    num_classes = num_classes or int(np.max(y)) + 1
    return Forest(num_classes, n_trees, max_depth, mode).fit(X, y, rng)
