"""Channel conversion and few-shot subsampling."""

from typing import Optional
import logging

import numpy as np

from src.errors import DataLoadError
from src.models import Dataset

logger = logging.getLogger(__name__)

# ITU-R BT.601 luma weights for R, G, B
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_gray(images: np.ndarray) -> np.ndarray:
    """
    Gray plane(s) of (c, h, w) or (n, c, h, w) images.

    One-channel input passes through; three channels are combined with
    0.299 R + 0.587 G + 0.114 B.
    """
    arr = np.asarray(images)
    axis = arr.ndim - 3
    channels = arr.shape[axis]
    if channels == 1:
        return np.take(arr, 0, axis=axis)
    if channels != 3:
        raise ValueError(f"expected 1 or 3 channels, got {channels}")
    return np.tensordot(arr.astype(np.float64), LUMA_WEIGHTS, axes=([axis], [0]))


def stratified_subsample(
    dataset: Dataset,
    per_class: int,
    seed: int,
    name: Optional[str] = None,
) -> Dataset:
    """
    Keep exactly ``per_class`` instances of every class.

    Instances are picked by a seeded shuffle within each class; the kept
    instances stay in their original order.

    Raises:
        DataLoadError: some class has fewer than ``per_class`` instances
    """
    rng = np.random.default_rng(seed)
    counts = dataset.class_counts()
    selected = []
    for cls in range(dataset.num_classes):
        if counts[cls] < per_class:
            raise DataLoadError(
                f"Class {cls} of {dataset.name} has {counts[cls]} instances, "
                f"{per_class} requested"
            )
        members = np.nonzero(dataset.labels == cls)[0]
        selected.append(rng.permutation(members)[:per_class])

    indices = np.sort(np.concatenate(selected))
    logger.info(
        "Subsampled %s/%s to %d per class (%d instances, seed %d)",
        dataset.name, dataset.split.value, per_class, indices.size, seed,
    )
    return dataset.take(indices, name=name)
