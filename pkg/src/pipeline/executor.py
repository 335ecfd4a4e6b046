"""
Tree execution.

A genotype is fitted into a phenotype on labelled rows of a dataset and the
phenotype then predicts on any dataset with the same signature. Execution is
vectorised over instances: every node produces one matrix for all rows.
"""

from dataclasses import dataclass, field
from typing import Any, Optional
import hashlib
import logging

import numpy as np

from src.config import LearnerConfig, get_settings
from src.errors import EdlgpError, ExecutionError, SignatureMismatch
from src.models import Channel, Dataset, DatasetSignature, Layer
from src.gp.primitives import PRIMITIVES
from src.gp.tree import Function, GenotypeTree, Node, Path, Terminal, render
from src.imaging import features as feature_ops
from src.imaging import filters as filter_ops
from src.data.transforms import to_gray
from src.learners.base import Classifier, Family, argmax_labels
from src.learners.ensemble import (
    cascade_transform,
    make_classifier,
    out_of_fold_predictions,
    sum_probabilities,
)
from src.pipeline.cache import SubtreeCache

logger = logging.getLogger(__name__)

_LABELLED_LAYERS = (Layer.CLASSIFICATION_CASCADE, Layer.CLASSIFICATION, Layer.SUMMATION)
_FLATTENING = ("LBP_FE", "HOG_FE", "Sobel_FE", "Gabor_FE", "Gau_FE", "GauD_FE")
_DESCRIPTORS = {
    "Hist": feature_ops.histogram_features,
    "HOG": feature_ops.hog_features,
    "LBP": feature_ops.lbp_features,
    "SIFT": feature_ops.dense_sift_features,
}


def is_label_free(node: Node) -> bool:
    """True when no classifier, cascade or summation node lies in the subtree."""
    if isinstance(node, Terminal):
        return True
    if PRIMITIVES[node.name].layer in _LABELLED_LAYERS:
        return False
    return all(is_label_free(child) for child in node.children)


def classifier_seed(seed: int, subtree: Node) -> int:
    """Seed for a classifier node from the evaluation seed and its subtree text."""
    digest = hashlib.sha256(render(subtree).encode()).digest()
    words = [int.from_bytes(digest[i: i + 4], "little") for i in range(0, 16, 4)]
    state = np.random.SeedSequence([seed, *words]).generate_state(2, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def channel_plane(dataset: Dataset, channel: Channel) -> np.ndarray:
    """(n, h, w) plane of one channel terminal."""
    images = dataset.images
    if channel is Channel.GRAY:
        return to_gray(images)
    index = {Channel.RED: 0, Channel.GREEN: 1, Channel.BLUE: 2}[channel]
    if index >= images.shape[1]:
        raise ValueError(f"channel {channel.value} is not available on gray-scale data")
    return images[:, index]


def apply_primitive(name: str, args: list[Any]) -> np.ndarray:
    """Evaluate a label-free primitive or a summation on already computed child values."""
    if name in filter_ops.FIXED_FILTERS:
        return filter_ops.fixed_filter(name, args[0])
    if name == "Gau":
        return filter_ops.gaussian_filter(args[0], args[1])
    if name == "GauD":
        return filter_ops.gaussian_derivative(*args)
    if name == "Gabor":
        return filter_ops.gabor_filter(*args)
    if name in ("Add_MaxP", "Sub_MaxP"):
        return filter_ops.pooled_combine(name, args[0], args[1])
    if name in _DESCRIPTORS:
        return _DESCRIPTORS[name](args[0])
    if name in _FLATTENING:
        return feature_ops.filter_and_flatten(name, *args)
    if name == "Conca":
        return feature_ops.concat_images(args[0], args[1])
    if name.startswith("Comb"):
        return feature_ops.combine_features(args)
    if name.startswith("Sum"):
        return sum_probabilities(args)
    raise ValueError(f"{name} is not a label-free primitive")


@dataclass
class PhenotypeTree:
    """A genotype with a fitted classifier on every classification and cascade node."""
    genotype: GenotypeTree
    signature: DatasetSignature
    classifiers: dict[Path, Classifier] = field(default_factory=dict)
    seed: int = 0


def _family_of(name: str) -> Family:
    return Family(name.removeprefix("CC_"))


class TreeExecutor:
    """
    Runs trees against datasets.

    Label-free subtrees are evaluated on the whole dataset (memoised in the
    optional cache) and then sliced to the requested rows, so folds share work.
    """

    def __init__(
        self,
        learner_config: Optional[LearnerConfig] = None,
        cascade_oof: bool = True,
        cascade_folds: Optional[int] = None,
        cache: Optional[SubtreeCache] = None,
    ):
        self.learner_config = learner_config or LearnerConfig()
        self.cascade_oof = cascade_oof
        self.cascade_folds = cascade_folds or get_settings().cascade_folds
        self.cache = cache

    # -- label-free evaluation -------------------------------------------

    def full_output(self, node: Node, dataset: Dataset, path: Path = ()) -> Any:
        """Output of a label-free node over every row of ``dataset``."""
        if isinstance(node, Terminal):
            if not node.is_channel:
                return node.value
            if self.cache is None:
                return channel_plane(dataset, node.value)
            return self.cache.get_or_compute(
                (dataset.key, node.label), lambda: np.array(channel_plane(dataset, node.value))
            )

        def compute() -> np.ndarray:
            args = [
                self.full_output(child, dataset, path + (i,))
                for i, child in enumerate(node.children)
            ]
            return self._apply(node, path, args)

        if self.cache is None:
            return compute()
        return self.cache.get_or_compute((dataset.key, render(node)), compute)

    def _apply(self, node: Function, path: Path, args: list[Any]) -> np.ndarray:
        try:
            return np.asarray(apply_primitive(node.name, args), dtype=np.float64)
        except EdlgpError:
            raise
        except Exception as e:
            raise ExecutionError(str(e), path, node.name) from e

    # -- fitting ------------------------------------------------------------

    def fit(
        self,
        genotype: GenotypeTree,
        dataset: Dataset,
        rows: Optional[np.ndarray] = None,
        seed: int = 0,
    ) -> tuple[PhenotypeTree, np.ndarray]:
        """
        Train every classifier node on the given rows.

        Returns the phenotype and the root probability matrix on those rows.
        """
        rows = np.arange(len(dataset)) if rows is None else np.asarray(rows)
        phenotype = PhenotypeTree(genotype, dataset.signature, seed=seed)
        labels = dataset.labels[rows]
        root = self._fit_node(genotype.root, (), dataset, rows, labels, phenotype)
        return phenotype, root

    def _fit_node(
        self,
        node: Node,
        path: Path,
        dataset: Dataset,
        rows: np.ndarray,
        labels: np.ndarray,
        phenotype: PhenotypeTree,
    ) -> Any:
        if isinstance(node, Terminal) or is_label_free(node):
            return self._rows_of(node, dataset, rows, path)

        sig = PRIMITIVES[node.name]
        if sig.layer in (Layer.CLASSIFICATION, Layer.CLASSIFICATION_CASCADE):
            X = self._fit_node(node.children[0], path + (0,), dataset, rows, labels, phenotype)
            params = [child.value for child in node.children[1:]]
            return self._fit_classifier(node, path, X, labels, params, phenotype)

        args = [
            self._fit_node(child, path + (i,), dataset, rows, labels, phenotype)
            for i, child in enumerate(node.children)
        ]
        return self._apply(node, path, args)

    def _fit_classifier(
        self,
        node: Function,
        path: Path,
        X: np.ndarray,
        labels: np.ndarray,
        params: list[Any],
        phenotype: PhenotypeTree,
    ) -> np.ndarray:
        family = _family_of(node.name)
        num_classes = phenotype.signature.num_classes
        n_trees, max_depth = (params + [None, None])[:2]

        def factory() -> Classifier:
            return make_classifier(family, num_classes, self.learner_config, n_trees, max_depth)

        rng = np.random.default_rng(classifier_seed(phenotype.seed, node))
        try:
            clf = factory().fit(X, labels, rng)
            phenotype.classifiers[path] = clf
            if node.name.startswith("CC_"):
                appended = None
                if self.cascade_oof:
                    appended = out_of_fold_predictions(factory, X, labels, self.cascade_folds, rng)
                return cascade_transform(clf, X, appended)
            return clf.predict_proba(X)
        except EdlgpError:
            raise
        except Exception as e:
            raise ExecutionError(str(e), path, node.name) from e

    # -- prediction -----------------------------------------------------------

    def predict(
        self,
        phenotype: PhenotypeTree,
        dataset: Dataset,
        rows: Optional[np.ndarray] = None,
        trace: Optional[dict[Path, np.ndarray]] = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        Labels and root probability matrix for ``dataset`` rows using frozen classifiers.

        When ``trace`` is given it receives every function node's output keyed by path.

        Raises:
            SignatureMismatch: dataset shape or class count differs from the fit data
        """
        if dataset.signature != phenotype.signature:
            raise SignatureMismatch(
                f"model was fitted on {phenotype.signature.as_dict()}, "
                f"data has {dataset.signature.as_dict()}"
            )
        rows = np.arange(len(dataset)) if rows is None else np.asarray(rows)
        num_classes = phenotype.signature.num_classes
        if rows.size == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((0, num_classes))

        root = self._predict_node(phenotype.genotype.root, (), dataset, rows, phenotype, trace)
        return argmax_labels(root), root

    def _predict_node(
        self,
        node: Node,
        path: Path,
        dataset: Dataset,
        rows: np.ndarray,
        phenotype: PhenotypeTree,
        trace: Optional[dict[Path, np.ndarray]],
    ) -> Any:
        if isinstance(node, Terminal) or is_label_free(node):
            out = self._rows_of(node, dataset, rows, path)
            if trace is not None and isinstance(node, Function):
                self._trace_subtree(node, path, dataset, rows, trace)
            return out

        sig = PRIMITIVES[node.name]
        if sig.layer in (Layer.CLASSIFICATION, Layer.CLASSIFICATION_CASCADE):
            X = self._predict_node(node.children[0], path + (0,), dataset, rows, phenotype, trace)
            clf = phenotype.classifiers[path]
            try:
                if node.name.startswith("CC_"):
                    out = cascade_transform(clf, X)
                else:
                    out = clf.predict_proba(X)
            except Exception as e:
                raise ExecutionError(str(e), path, node.name) from e
            if trace is not None:
                trace[path] = out
            return out

        args = [
            self._predict_node(child, path + (i,), dataset, rows, phenotype, trace)
            for i, child in enumerate(node.children)
        ]
        out = self._apply(node, path, args)
        if trace is not None:
            trace[path] = out
        return out

    def _trace_subtree(
        self,
        node: Function,
        path: Path,
        dataset: Dataset,
        rows: np.ndarray,
        trace: dict[Path, np.ndarray],
    ) -> None:
        trace[path] = self._rows_of(node, dataset, rows, path)
        for i, child in enumerate(node.children):
            if isinstance(child, Function):
                self._trace_subtree(child, path + (i,), dataset, rows, trace)

    def _rows_of(self, node: Node, dataset: Dataset, rows: np.ndarray, path: Path) -> Any:
        out = self.full_output(node, dataset, path)
        if isinstance(node, Terminal) and not node.is_channel:
            return out
        return out[rows]


def execute_fit(
    genotype: GenotypeTree,
    dataset: Dataset,
    seed: int,
    cascade_oof: bool = True,
    learner_config: Optional[LearnerConfig] = None,
    cache: Optional[SubtreeCache] = None,
) -> tuple[PhenotypeTree, np.ndarray]:
    executor = TreeExecutor(learner_config, cascade_oof, cache=cache)
    return executor.fit(genotype, dataset, seed=seed)


def execute_predict(
    phenotype: PhenotypeTree,
    dataset: Dataset,
    learner_config: Optional[LearnerConfig] = None,
    cache: Optional[SubtreeCache] = None,
) -> tuple[np.ndarray, np.ndarray]:
    executor = TreeExecutor(learner_config, cache=cache)
    return executor.predict(phenotype, dataset)
