"""Multinomial logistic regression and one-vs-rest linear SVM."""

from typing import Optional
import logging

import numpy as np
from scipy.special import log_softmax, softmax

from src.config import LearnerConfig
from src.learners.base import Classifier, Family, Standardizer, one_hot

logger = logging.getLogger(__name__)


def softmax_loss_and_gradient(
    W: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient w.r.t. (W, b)."""
    logits = X @ W + b
    log_p = log_softmax(logits, axis=1)
    n = X.shape[0]
    loss = -float((Y * log_p).sum()) / n + 0.5 * l2 * float((W ** 2).sum())
    residual = (np.exp(log_p) - Y) / n
    grad_W = X.T @ residual + l2 * W
    grad_b = residual.sum(axis=0)
    return loss, grad_W, grad_b


class _ConstantMixin:
    """Degenerate model for single-class training data."""

    constant: Optional[int] = None

    def _constant_output(self, n: int) -> np.ndarray:
        out = np.zeros((n, self.num_classes))
        out[:, self.constant] = 1.0
        return out


class LogisticRegression(_ConstantMixin, Classifier):
    """Softmax regression trained by full-batch gradient descent on standardised features."""

    family = Family.LR

    def __init__(self, num_classes: int, config: Optional[LearnerConfig] = None):
        super().__init__(num_classes)
        self.config = config or LearnerConfig()
        self.scaler = Standardizer()
        self.W: Optional[np.ndarray] = None
        self.b: Optional[np.ndarray] = None
        self.loss_history: list[float] = []

    def _fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None:
        classes = np.unique(y)
        if classes.size == 1:
            self.constant = int(classes[0])
            return
        self.constant = None

        cfg = self.config
        Xs = self.scaler.fit(X).transform(X)
        Y = one_hot(y, self.num_classes)
        W = np.zeros((X.shape[1], self.num_classes))
        b = np.zeros(self.num_classes)
        rate = cfg.lr_learning_rate

        loss, gW, gb = softmax_loss_and_gradient(W, b, Xs, Y, cfg.lr_l2)
        self.loss_history = [loss]
        for _ in range(cfg.lr_max_epochs):
            if np.sqrt((gW ** 2).sum() + (gb ** 2).sum()) < cfg.lr_tolerance:
                break
            W_new, b_new = W - rate * gW, b - rate * gb
            new_loss, new_gW, new_gb = softmax_loss_and_gradient(W_new, b_new, Xs, Y, cfg.lr_l2)
            if new_loss > loss:
                rate /= 2
                continue
            W, b, loss, gW, gb = W_new, b_new, new_loss, new_gW, new_gb
            self.loss_history.append(loss)

        logger.debug("LR fit: %d accepted steps, final loss %.6f", len(self.loss_history) - 1, loss)
        self.W, self.b = W, b

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return self._constant_output(X.shape[0])
        return softmax(self.scaler.transform(X) @ self.W + self.b, axis=1)


class LinearSVM(_ConstantMixin, Classifier):
    """
    One-vs-rest linear SVMs on standardised features.

    Subgradient descent on the L2-regularised hinge loss with step
    ``1 / (l2 * epoch)``; the bias is an extra regularised weight. Predictions
    are one-hot at the largest margin.
    """

    family = Family.SVM

    def __init__(self, num_classes: int, config: Optional[LearnerConfig] = None):
        super().__init__(num_classes)
        self.config = config or LearnerConfig()
        self.scaler = Standardizer()
        self.W: Optional[np.ndarray] = None

    @staticmethod
    def _augment(X: np.ndarray) -> np.ndarray:
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def _fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None:
        classes = np.unique(y)
        if classes.size == 1:
            self.constant = int(classes[0])
            return
        self.constant = None

        lam = self.config.svm_l2
        Xa = self._augment(self.scaler.fit(X).transform(X))
        targets = 2.0 * one_hot(y, self.num_classes) - 1.0
        n = Xa.shape[0]
        W = np.zeros((Xa.shape[1], self.num_classes))
        for epoch in range(1, self.config.svm_epochs + 1):
            margins = targets * (Xa @ W)
            active = (margins < 1.0) * targets
            grad = lam * W - Xa.T @ active / n
            W = W - grad / (lam * epoch)
        self.W = W

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self._augment(self.scaler.transform(X)) @ self.W

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return self._constant_output(X.shape[0])
        winners = np.argmax(self.decision_function(X), axis=1)
        return one_hot(winners, self.num_classes)


def fit_logistic_regression(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    num_classes: Optional[int] = None,
    config: Optional[LearnerConfig] = None,
) -> LogisticRegression:
    num_classes = num_classes or int(np.max(y)) + 1
    return LogisticRegression(num_classes, config).fit(X, y, rng)


def fit_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    num_classes: Optional[int] = None,
    config: Optional[LearnerConfig] = None,
) -> LinearSVM:
    num_classes = num_classes or int(np.max(y)) + 1
    return LinearSVM(num_classes, config).fit(X, y, rng)
