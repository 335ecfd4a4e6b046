"""
Convert SVHN cropped-digit MAT files into CIFAR-10 style binary batches.

Usage:
    python scripts/svhn_to_cifar.py train_32x32.mat svhn_train.bin
    python scripts/svhn_to_cifar.py test_32x32.mat svhn_test.bin

The MAT file holds ``X`` with shape (32, 32, 3, N) and ``y`` with shape (N, 1)
where digit 0 is stored as label 10.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.io import loadmat

logger = logging.getLogger("svhn_to_cifar")


def svhn_records(mat_path: Path) -> np.ndarray:
    """(N, 3073) uint8 records: label byte followed by the R, G and B planes."""
    mat = loadmat(mat_path)
    images = np.asarray(mat["X"], dtype=np.uint8)
    labels = np.asarray(mat["y"], dtype=np.int64).reshape(-1)
    if images.ndim != 4 or images.shape[:3] != (32, 32, 3):
        raise ValueError(f"Expected X of shape (32, 32, 3, N), got {images.shape}")
    if images.shape[3] != labels.shape[0]:
        raise ValueError(f"{images.shape[3]} images but {labels.shape[0]} labels")

    labels = np.where(labels == 10, 0, labels)
    if labels.min() < 0 or labels.max() > 9:
        raise ValueError(f"Labels outside 0..9 after remapping: {np.unique(labels)}")

    planes = np.transpose(images, (3, 2, 0, 1)).reshape(images.shape[3], -1)
    return np.concatenate([labels.astype(np.uint8)[:, np.newaxis], planes], axis=1)


def main() -> int:
    parser = argparse.ArgumentParser(description="SVHN MAT to CIFAR-10 binary batch")
    parser.add_argument("mat", type=Path, help="SVHN *_32x32.mat file")
    parser.add_argument("output", type=Path, help="Output .bin batch")
    args = parser.parse_args()
    logging.basicConfig(level="INFO", format="%(levelname)s %(name)s: %(message)s")

    try:
        records = svhn_records(args.mat)
    except (OSError, KeyError, ValueError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 3

    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_bytes(np.ascontiguousarray(records).tobytes())
    logger.info("Wrote %d records to %s", records.shape[0], args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
