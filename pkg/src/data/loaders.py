"""Dataset file loaders: IDX, CIFAR binary batches and PGM directories."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence
import gzip
import hashlib
import logging
import struct

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from src.config import DatasetConfig
from src.errors import ConfigError, DataLoadError
from src.models import Dataset, Split
from src.data.dump import read_dump
from src.data.transforms import stratified_subsample

logger = logging.getLogger(__name__)


def _read_bytes(path: Path) -> bytes:
    """Whole file, transparently gunzipped for ``.gz`` paths."""
    if not path.exists():
        raise DataLoadError("File not found", str(path))
    if not path.is_file():
        raise DataLoadError("Path is not a file", str(path))
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as f:
                return f.read()
        return path.read_bytes()
    except (OSError, EOFError) as e:
        raise DataLoadError(f"Cannot read file: {e}", str(path)) from e


def file_sha256(path: Path) -> str:
    """SHA-256 of a data file, read in chunks."""
    sha256 = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            sha256.update(chunk)
    return sha256.hexdigest()


class IdxReader:
    """Reads the big-endian IDX format used by (Fashion-)MNIST."""

    IMAGES_MAGIC = 0x00000803
    LABELS_MAGIC = 0x00000801
    # Byte offset of the item count in both headers
    COUNT_OFFSET = 4

    def read_images(self, path: Path) -> np.ndarray:
        data = _read_bytes(path)
        magic = self._magic(data, path)
        if magic != self.IMAGES_MAGIC:
            raise DataLoadError(f"Invalid IDX image magic 0x{magic:08x}", str(path), 0)
        if len(data) < 16:
            raise DataLoadError("Truncated IDX image header", str(path), len(data))
        count, rows, cols = struct.unpack(">III", data[4:16])
        expected = 16 + count * rows * cols
        if len(data) < expected:
            raise DataLoadError(
                f"Truncated IDX image data: header promises {count} images of {rows}x{cols}, "
                f"{expected} bytes needed",
                str(path), len(data),
            )
        pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
        return pixels.reshape(count, 1, rows, cols)

    def read_labels(self, path: Path) -> np.ndarray:
        data = _read_bytes(path)
        magic = self._magic(data, path)
        if magic != self.LABELS_MAGIC:
            raise DataLoadError(f"Invalid IDX label magic 0x{magic:08x}", str(path), 0)
        if len(data) < 8:
            raise DataLoadError("Truncated IDX label header", str(path), len(data))
        (count,) = struct.unpack(">I", data[4:8])
        if len(data) < 8 + count:
            raise DataLoadError(
                f"Truncated IDX label data: header promises {count} labels",
                str(path), len(data),
            )
        return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(np.int64)

    @staticmethod
    def _magic(data: bytes, path: Path) -> int:
        if len(data) < 4:
            raise DataLoadError("File too small to hold an IDX header", str(path), len(data))
        return struct.unpack(">I", data[:4])[0]


def load_idx(
    images_path: Path,
    labels_path: Path,
    split: Split = Split.TRAIN,
    name: Optional[str] = None,
    num_classes: Optional[int] = None,
) -> Dataset:
    """
    Gray-scale dataset from an IDX image/label file pair, scaled by 1/255.

    Raises:
        DataLoadError: bad magic, truncated file or image/label count mismatch
    """
    reader = IdxReader()
    pixels = reader.read_images(Path(images_path))
    labels = reader.read_labels(Path(labels_path))
    if pixels.shape[0] != labels.shape[0]:
        raise DataLoadError(
            f"Label count {labels.shape[0]} does not match the {pixels.shape[0]} images "
            f"in {images_path}",
            str(labels_path), IdxReader.COUNT_OFFSET,
        )
    return _build(name or Path(images_path).stem, split, pixels, labels, num_classes)


CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE


def load_cifar_binary(
    paths: Sequence[Path],
    split: Split = Split.TRAIN,
    name: str = "cifar",
    num_classes: Optional[int] = None,
) -> Dataset:
    """
    Colour dataset from CIFAR-10 binary batches (label byte then R, G, B planes).

    Raises:
        DataLoadError: empty file or a size that is not a whole number of records
    """
    if not paths:
        raise DataLoadError("No CIFAR batch files given")
    images, labels = [], []
    for path in paths:
        data = _read_bytes(Path(path))
        if len(data) == 0:
            raise DataLoadError("Empty CIFAR batch", str(path), 0)
        if len(data) % CIFAR_RECORD != 0:
            raise DataLoadError(
                f"Size {len(data)} is not a multiple of {CIFAR_RECORD}-byte records",
                str(path), (len(data) // CIFAR_RECORD) * CIFAR_RECORD,
            )
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels.append(records[:, 0].astype(np.int64))
        images.append(records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE))
        logger.debug("Read %d records from %s", records.shape[0], path)
    return _build(name, split, np.concatenate(images), np.concatenate(labels), num_classes)


def read_manifest(path: Path) -> pd.DataFrame:
    """``relative_path,label`` lines; a header row is tolerated."""
    try:
        frame = pd.read_csv(path, header=None, names=["path", "label"], dtype=str, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataLoadError(f"Cannot read manifest: {e}", str(path)) from e
    if not frame.empty and not frame.loc[0, "label"].strip().lstrip("-").isdigit():
        frame = frame.iloc[1:]
    try:
        frame["label"] = frame["label"].astype(int)
    except ValueError as e:
        raise DataLoadError(f"Non-integer label in manifest: {e}", str(path)) from e
    return frame.reset_index(drop=True)


def load_pgm_directory(
    manifest_path: Path,
    split: Split = Split.TRAIN,
    name: Optional[str] = None,
    num_classes: Optional[int] = None,
) -> Dataset:
    """
    Gray-scale dataset from PGM files (P2 or P5) listed in a manifest.

    Paths are relative to the manifest's directory; all images must share one size.
    """
    manifest_path = Path(manifest_path)
    frame = read_manifest(manifest_path)
    if frame.empty:
        raise DataLoadError("Manifest lists no images", str(manifest_path))

    planes = []
    for relative in frame["path"]:
        image_path = manifest_path.parent / relative.strip()
        try:
            with Image.open(image_path) as img:
                plane = np.asarray(img.convert("L"), dtype=np.uint8)
        except (OSError, UnidentifiedImageError) as e:
            raise DataLoadError(f"Cannot read image: {e}", str(image_path)) from e
        if planes and plane.shape != planes[0].shape:
            raise DataLoadError(
                f"Image size {plane.shape} differs from {planes[0].shape}", str(image_path)
            )
        planes.append(plane)

    pixels = np.stack(planes)[:, np.newaxis]
    labels = frame["label"].to_numpy(dtype=np.int64)
    return _build(name or manifest_path.stem, split, pixels, labels, num_classes)


def _build(
    name: str,
    split: Split,
    pixels: np.ndarray,
    labels: np.ndarray,
    num_classes: Optional[int],
) -> Dataset:
    if labels.size and labels.min() < 0:
        raise DataLoadError(f"Negative label {labels.min()} in {name}")
    inferred = int(labels.max()) + 1 if labels.size else 0
    classes = num_classes or inferred
    if inferred > classes:
        raise DataLoadError(f"Label {inferred - 1} outside [0, {classes}) in {name}")
    images = pixels.astype(np.float32) / np.float32(255.0)
    logger.info(
        "Loaded %s/%s: %d images of %dx%dx%d, %d classes",
        name, split.value, images.shape[0], images.shape[3], images.shape[2],
        images.shape[1], classes,
    )
    return Dataset(name=name, split=split, images=images, labels=labels, num_classes=classes)


@dataclass
class LoadedData:
    """Training and test splits ready for an experiment."""
    train: Dataset
    test: Optional[Dataset]
    full_train_size: int


def _load_split(config: DatasetConfig, split: Split) -> Optional[Dataset]:
    is_train = split is Split.TRAIN
    images = config.train_images if is_train else config.test_images
    labels = config.train_labels if is_train else config.test_labels
    name = config.name

    if config.format == "idx":
        if images is None or labels is None:
            return None
        return load_idx(images, labels, split, name, config.num_classes)
    if config.format == "cifar":
        batches = config.train_batches if is_train else config.test_batches
        if not batches:
            return None
        return load_cifar_binary(batches, split, name, config.num_classes)
    if config.format == "pgm":
        manifest = config.train_manifest if is_train else config.test_manifest
        if manifest is None:
            return None
        return load_pgm_directory(manifest, split, name, config.num_classes)
    if config.format == "dump":
        if images is None:
            return None
        return read_dump(images, split, name)
    raise ConfigError(f"Unknown dataset format {config.format}")


def load_datasets(config: DatasetConfig, require_test: bool = False) -> LoadedData:
    """
    Load the configured splits and apply few-shot subsampling.

    The training split is reduced to ``per_class`` instances per class; the
    test split is kept whole unless ``test_per_class`` is set.

    Raises:
        ConfigError: no training data configured, or a required test split missing
        DataLoadError: unreadable files or insufficient classes
    """
    train = _load_split(config, Split.TRAIN)
    if train is None:
        raise ConfigError(f"No training data configured for format {config.format}")
    test = _load_split(config, Split.TEST)
    if test is None and require_test:
        raise ConfigError("No test data configured")

    if test is not None and test.num_classes != train.num_classes:
        classes = max(test.num_classes, train.num_classes)
        train = Dataset(train.name, train.split, train.images, train.labels, classes)
        test = Dataset(test.name, test.split, test.images, test.labels, classes)

    full_size = len(train)
    if config.per_class > 0:
        train = stratified_subsample(train, config.per_class, config.subsample_seed)
    if test is not None and config.test_per_class > 0:
        test = stratified_subsample(test, config.test_per_class, config.subsample_seed + 1)
    return LoadedData(train=train, test=test, full_train_size=full_size)
