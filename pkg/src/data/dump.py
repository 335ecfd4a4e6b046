"""
Canonical dataset dump (``.edl``).

Layout: an ASCII header line ``W H C classes count`` followed, per instance,
by a little-endian int32 label and C*H*W little-endian float32 pixels in
channel, row, column order.
"""

from pathlib import Path
from typing import Optional
import logging

import numpy as np

from src.errors import DataLoadError
from src.models import Dataset, Split

logger = logging.getLogger(__name__)

_LABEL = np.dtype("<i4")
_PIXEL = np.dtype("<f4")


def write_dump(dataset: Dataset, path: Path) -> Path:
    path = Path(path)
    n, c, h, w = dataset.images.shape
    record = np.dtype([("label", _LABEL), ("pixels", _PIXEL, (c * h * w,))])
    records = np.empty(n, dtype=record)
    records["label"] = dataset.labels
    records["pixels"] = dataset.images.reshape(n, -1)

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(f"{w} {h} {c} {dataset.num_classes} {n}\n".encode("ascii"))
        f.write(records.tobytes())
    logger.debug("Wrote %d instances to %s", n, path)
    return path


def read_dump(path: Path, split: Split = Split.TRAIN, name: Optional[str] = None) -> Dataset:
    """
    Raises:
        DataLoadError: missing file, malformed header or truncated body
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataLoadError(f"Cannot read dump: {e}", str(path)) from e

    newline = data.find(b"\n")
    if newline < 0:
        raise DataLoadError("Dump header line missing", str(path), len(data))
    try:
        w, h, c, classes, n = (int(v) for v in data[:newline].decode("ascii").split())
    except (UnicodeDecodeError, ValueError) as e:
        raise DataLoadError(f"Malformed dump header: {e}", str(path), 0) from e

    record = np.dtype([("label", _LABEL), ("pixels", _PIXEL, (c * h * w,))])
    body = newline + 1
    expected = body + n * record.itemsize
    if len(data) < expected:
        raise DataLoadError(
            f"Truncated dump: {n} records of {record.itemsize} bytes expected",
            str(path), len(data),
        )
    records = np.frombuffer(data, dtype=record, count=n, offset=body)
    images = records["pixels"].astype(np.float32).reshape(n, c, h, w)
    labels = records["label"].astype(np.int64)
    return Dataset(
        name=name or path.stem,
        split=split,
        images=images,
        labels=labels,
        num_classes=classes,
    )
