"""Tests for dataset loaders, channel conversion, subsampling and dumps."""

import gzip
import pytest
import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import DatasetConfig
from src.errors import ConfigError, DataLoadError
from src.models import Dataset, Split
from src.data.dump import read_dump, write_dump
from src.data.loaders import (
    CIFAR_RECORD,
    IdxReader,
    load_cifar_binary,
    load_datasets,
    load_idx,
    load_pgm_directory,
    read_manifest,
)
from src.data.transforms import stratified_subsample, to_gray
from src.visualization.planes import write_pgm_p2


def idx_images(pixels: np.ndarray) -> bytes:
    count, rows, cols = pixels.shape
    return struct.pack(">IIII", 0x00000803, count, rows, cols) + pixels.astype(np.uint8).tobytes()


def idx_labels(labels) -> bytes:
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


def write_idx_pair(tmp_path: Path, pixels: np.ndarray, labels, gz: bool = False):
    suffix = ".gz" if gz else ""
    images_path = tmp_path / f"images-idx3-ubyte{suffix}"
    labels_path = tmp_path / f"labels-idx1-ubyte{suffix}"
    writer = gzip.open if gz else open
    with writer(images_path, "wb") as f:
        f.write(idx_images(pixels))
    with writer(labels_path, "wb") as f:
        f.write(idx_labels(labels))
    return images_path, labels_path


def cifar_records(labels, seed: int = 0) -> bytes:
    rng = np.random.default_rng(seed)
    out = bytearray()
    for label in labels:
        out.append(label)
        out.extend(rng.integers(0, 256, size=CIFAR_RECORD - 1, dtype=np.uint8).tobytes())
    return bytes(out)


def small_dataset(per_class=(3, 4, 5)) -> Dataset:
    labels = np.concatenate([np.full(n, c) for c, n in enumerate(per_class)])
    images = np.random.default_rng(1).random((labels.size, 1, 4, 4)).astype(np.float32)
    return Dataset("small", Split.TRAIN, images, labels, len(per_class))


class TestIdx:
    def test_reads_pixels_and_labels(self, tmp_path):
        pixels = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
        images_path, labels_path = write_idx_pair(tmp_path, pixels, [1, 0])
        data = load_idx(images_path, labels_path, num_classes=10)
        assert data.images.shape == (2, 1, 3, 4)
        assert data.images.dtype == np.float32
        assert data.images[0, 0, 0, 1] == pytest.approx(1 / 255)
        np.testing.assert_array_equal(data.labels, [1, 0])
        assert data.num_classes == 10

    def test_gzip(self, tmp_path):
        pixels = np.full((3, 2, 2), 255, dtype=np.uint8)
        images_path, labels_path = write_idx_pair(tmp_path, pixels, [0, 1, 2], gz=True)
        data = load_idx(images_path, labels_path)
        np.testing.assert_array_equal(data.images, 1.0)
        assert data.num_classes == 3

    def test_truncated_images_report_offset(self, tmp_path):
        raw = idx_images(np.zeros((4, 5, 5)))[:-7]
        path = tmp_path / "short-idx3-ubyte"
        path.write_bytes(raw)
        with pytest.raises(DataLoadError) as exc:
            IdxReader().read_images(path)
        assert exc.value.offset == len(raw)
        assert exc.value.exit_code == 3

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "labels-idx1-ubyte"
        path.write_bytes(idx_labels([0, 1]))
        with pytest.raises(DataLoadError, match="magic"):
            IdxReader().read_images(path)

    def test_count_mismatch(self, tmp_path):
        images_path, _ = write_idx_pair(tmp_path, np.zeros((3, 2, 2)), [0, 1, 0])
        labels_path = tmp_path / "other-labels"
        labels_path.write_bytes(idx_labels([0, 1]))
        with pytest.raises(DataLoadError) as exc:
            load_idx(images_path, labels_path)
        assert exc.value.path == str(labels_path)
        assert exc.value.offset == IdxReader.COUNT_OFFSET
        assert str(images_path) in str(exc.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataLoadError, match="not found"):
            IdxReader().read_labels(tmp_path / "nope")


class TestCifar:
    def test_planes_in_rgb_order(self, tmp_path):
        path = tmp_path / "batch.bin"
        raw = cifar_records([3, 7])
        path.write_bytes(raw)
        data = load_cifar_binary([path], num_classes=10)
        assert data.images.shape == (2, 3, 32, 32)
        np.testing.assert_array_equal(data.labels, [3, 7])
        assert data.images[1, 2, 0, 0] == pytest.approx(raw[CIFAR_RECORD + 1 + 2048] / 255)

    def test_several_batches(self, tmp_path):
        paths = []
        for i in range(2):
            path = tmp_path / f"batch_{i}.bin"
            path.write_bytes(cifar_records([i, i + 1, i + 2], seed=i))
            paths.append(path)
        assert len(load_cifar_binary(paths)) == 6

    def test_partial_record(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(cifar_records([1, 2])[: CIFAR_RECORD + 100])
        with pytest.raises(DataLoadError) as exc:
            load_cifar_binary([path])
        assert exc.value.offset == CIFAR_RECORD

    def test_empty_batch(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(b"")
        with pytest.raises(DataLoadError):
            load_cifar_binary([path])

    def test_label_outside_class_count(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(cifar_records([0, 9]))
        with pytest.raises(DataLoadError):
            load_cifar_binary([path], num_classes=5)


class TestPgm:
    def test_manifest_with_binary_and_plain_files(self, tmp_path):
        (tmp_path / "s1").mkdir()
        first = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        Image.fromarray(first).save(tmp_path / "s1" / "1.pgm")
        write_pgm_p2(np.ones((3, 4)) * np.arange(4), tmp_path / "s1" / "2.pgm")
        manifest = tmp_path / "train.csv"
        manifest.write_text("path,label\ns1/1.pgm,0\ns1/2.pgm, 1\n")

        data = load_pgm_directory(manifest)
        assert data.images.shape == (2, 1, 3, 4)
        np.testing.assert_allclose(data.images[0, 0], first / 255, rtol=1e-6)
        np.testing.assert_allclose(data.images[1, 0, 0], [0, 85 / 255, 170 / 255, 1.0], rtol=1e-6)
        np.testing.assert_array_equal(data.labels, [0, 1])
        assert data.name == "train"

    def test_manifest_without_header(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("a.pgm,2\nb.pgm,0\n")
        frame = read_manifest(manifest)
        assert list(frame["label"]) == [2, 0]

    def test_sizes_must_match(self, tmp_path):
        Image.fromarray(np.zeros((3, 4), dtype=np.uint8)).save(tmp_path / "a.pgm")
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "b.pgm")
        manifest = tmp_path / "m.csv"
        manifest.write_text("a.pgm,0\nb.pgm,1\n")
        with pytest.raises(DataLoadError, match="differs"):
            load_pgm_directory(manifest)

    def test_unreadable_image(self, tmp_path):
        (tmp_path / "a.pgm").write_text("not an image")
        manifest = tmp_path / "m.csv"
        manifest.write_text("a.pgm,0\n")
        with pytest.raises(DataLoadError):
            load_pgm_directory(manifest)


class TestTransforms:
    def test_gray_weights(self):
        images = np.zeros((1, 3, 2, 2))
        images[0, 0], images[0, 1], images[0, 2] = 1.0, 0.5, 0.25
        np.testing.assert_allclose(to_gray(images), 0.299 + 0.587 * 0.5 + 0.114 * 0.25)

    def test_gray_passthrough(self):
        images = np.random.default_rng(0).random((2, 1, 3, 3))
        np.testing.assert_array_equal(to_gray(images), images[:, 0])

    def test_gray_rejects_two_channels(self):
        with pytest.raises(ValueError):
            to_gray(np.zeros((1, 2, 3, 3)))

    def test_subsample_counts_and_order(self):
        data = small_dataset()
        sub = stratified_subsample(data, 3, seed=4)
        np.testing.assert_array_equal(sub.class_counts(), [3, 3, 3])
        assert len(sub) == 9
        # kept instances stay in original order: labels are grouped ascending
        assert (np.diff(sub.labels) >= 0).all()

    def test_subsample_is_seeded(self):
        data = small_dataset()
        a = stratified_subsample(data, 2, seed=9)
        b = stratified_subsample(data, 2, seed=9)
        np.testing.assert_array_equal(a.images, b.images)

    def test_subsample_too_few(self):
        with pytest.raises(DataLoadError, match="Class 0"):
            stratified_subsample(small_dataset(), 4, seed=0)


class TestDump:
    def test_round_trip_is_exact(self, tmp_path):
        data = small_dataset()
        path = write_dump(data, tmp_path / "small.edl")
        back = read_dump(path, Split.TEST)
        np.testing.assert_array_equal(back.images, data.images)
        np.testing.assert_array_equal(back.labels, data.labels)
        assert back.signature == data.signature
        assert back.split is Split.TEST
        assert back.key != data.key

    def test_header_line(self, tmp_path):
        path = write_dump(small_dataset(), tmp_path / "small.edl")
        assert path.read_bytes().split(b"\n", 1)[0] == b"4 4 1 3 12"

    def test_truncated(self, tmp_path):
        path = write_dump(small_dataset(), tmp_path / "small.edl")
        raw = path.read_bytes()
        path.write_bytes(raw[:-1])
        with pytest.raises(DataLoadError) as exc:
            read_dump(path)
        assert exc.value.offset == len(raw) - 1

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.edl"
        path.write_bytes(b"4 4 x\n")
        with pytest.raises(DataLoadError, match="header"):
            read_dump(path)


class TestLoadDatasets:
    def test_dump_with_subsampling(self, tmp_path):
        write_dump(small_dataset((6, 6)), tmp_path / "train.edl")
        write_dump(small_dataset((2, 2)), tmp_path / "test.edl")
        config = DatasetConfig(
            name="unit", format="dump",
            train_images=tmp_path / "train.edl", test_images=tmp_path / "test.edl",
            per_class=4,
        )
        loaded = load_datasets(config, require_test=True)
        assert loaded.full_train_size == 12
        assert len(loaded.train) == 8
        assert len(loaded.test) == 4
        assert loaded.train.name == "unit"

    def test_missing_training_data(self):
        with pytest.raises(ConfigError):
            load_datasets(DatasetConfig(format="idx"))

    def test_required_test_split(self, tmp_path):
        write_dump(small_dataset(), tmp_path / "train.edl")
        config = DatasetConfig(format="dump", train_images=tmp_path / "train.edl")
        assert load_datasets(config).test is None
        with pytest.raises(ConfigError):
            load_datasets(config, require_test=True)
