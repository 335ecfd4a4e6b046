"""Base classes for classifier primitives."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional

import numpy as np


class Family(Enum):
    """Classifier families available to classification and cascade nodes."""
    RF = "RF"
    ERF = "ERF"
    LR = "LR"
    SVM = "SVM"

    @property
    def is_soft(self) -> bool:
        return self is not Family.SVM


class Classifier(ABC):
    """
    Base interface for all classifier primitives.

    A classifier is fitted once and afterwards only predicts; ``predict_proba``
    returns an (n, num_classes) matrix.
    """

    family: Family

    def __init__(self, num_classes: int):
        self.num_classes = num_classes
        self.input_dim: Optional[int] = None

    @abstractmethod
    def _fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None:
        ...

    @abstractmethod
    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> "Classifier":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError(f"cannot fit on an empty or non-2D feature matrix {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        self.input_dim = X.shape[1]
        self._fit(X, y, rng)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.input_dim is None:
            raise RuntimeError(f"{self.family.value} classifier used before fitting")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"{self.family.value} expects {self.input_dim} features, got {X.shape[-1]}"
            )
        return self._predict_proba(X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return argmax_labels(self.predict_proba(X))

    @property
    def fitted(self) -> bool:
        return self.input_dim is not None


def argmax_labels(probs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class index."""
    return np.argmax(probs, axis=-1)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


class Standardizer:
    """Per-feature z-scoring from fit data; zero-variance features map to 0."""

    def __init__(self):
        self.mean: Optional[np.ndarray] = None
        self.scale: Optional[np.ndarray] = None

    def fit(self, X: np.ndarray) -> "Standardizer":
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale = np.where(std > 0, 1.0 / np.where(std > 0, std, 1.0), 0.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) * self.scale
