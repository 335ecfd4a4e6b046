"""Core data models for EDLGP."""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional
import hashlib

import numpy as np


class GpType(Enum):
    """Node types of the strongly-typed program trees."""
    IMAGE = "image"
    FEATURES = "features"
    PROBS = "probs"
    TREE_COUNT = "tree_count"
    TREE_DEPTH = "tree_depth"
    FREQUENCY = "frequency"
    ORIENTATION = "orientation"
    ORDER = "order"
    SIGMA = "sigma"

    @property
    def is_parameter(self) -> bool:
        return self not in (GpType.IMAGE, GpType.FEATURES, GpType.PROBS)


class Layer(Enum):
    """Concept layer a primitive belongs to."""
    FILTERING = "Filtering"
    FEATURE_EXTRACTION = "FeatureExtraction"
    CONCATENATION = "Concatenation"
    CLASSIFICATION_CASCADE = "ClassificationCascade"
    CLASSIFICATION = "Classification"
    SUMMATION = "Summation"
    INPUT = "Input"
    PARAMETER = "Parameter"


class Channel(Enum):
    """Image channel terminals."""
    RED = "Red"
    GREEN = "Green"
    BLUE = "Blue"
    GRAY = "Gray"


class Split(Enum):
    """Dataset split tag."""
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class DatasetSignature:
    """Shape contract shared by every instance of a dataset."""
    width: int
    height: int
    channels: int
    num_classes: int

    def as_dict(self) -> dict[str, int]:
        return {
            "width": self.width,
            "height": self.height,
            "channels": self.channels,
            "num_classes": self.num_classes,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Labeled image set.

    ``images`` has shape (n, channels, height, width) with values in [0, 1];
    ``labels`` has shape (n,) with integers in [0, num_classes).
    """
    name: str
    split: Split
    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def signature(self) -> DatasetSignature:
        _, channels, height, width = self.images.shape
        return DatasetSignature(
            width=int(width),
            height=int(height),
            channels=int(channels),
            num_classes=self.num_classes,
        )

    @cached_property
    def key(self) -> str:
        """Content digest used to key cached node outputs."""
        digest = hashlib.sha1()
        digest.update(self.name.encode())
        digest.update(self.split.value.encode())
        digest.update(np.ascontiguousarray(self.images).tobytes())
        return digest.hexdigest()[:16]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def take(self, indices: np.ndarray, name: Optional[str] = None) -> "Dataset":
        """Subset in the given index order."""
        return Dataset(
            name=name or self.name,
            split=self.split,
            images=np.ascontiguousarray(self.images[indices]),
            labels=np.ascontiguousarray(self.labels[indices]),
            num_classes=self.num_classes,
        )


@dataclass
class FitnessReport:
    """Outcome of one fitness evaluation."""
    fitness: float  # percentage, 0-100
    fold_accuracies: list[float] = field(default_factory=list)
    k: int = 0
    wall_time: float = 0.0
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass
class GenerationRecord:
    """One row of the per-generation log."""
    generation: int
    best_fitness: float
    mean_fitness: float
    mean_tree_size: float
    best_tree_size: int
    elapsed_s: float
    failures: int = 0

    def as_row(self) -> dict[str, float]:
        return {
            "generation": self.generation,
            "best_fitness": self.best_fitness,
            "mean_fitness": self.mean_fitness,
            "mean_tree_size": self.mean_tree_size,
            "best_tree_size": self.best_tree_size,
            "elapsed_s": self.elapsed_s,
            "failures": self.failures,
        }
