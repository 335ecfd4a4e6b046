"""Dataset loading, conversion and subsampling."""

from src.data.dump import read_dump, write_dump
from src.data.loaders import (
    LoadedData,
    file_sha256,
    load_cifar_binary,
    load_datasets,
    load_idx,
    load_pgm_directory,
)
from src.data.transforms import stratified_subsample, to_gray

__all__ = [
    "read_dump",
    "write_dump",
    "LoadedData",
    "file_sha256",
    "load_cifar_binary",
    "load_datasets",
    "load_idx",
    "load_pgm_directory",
    "stratified_subsample",
    "to_gray",
]
