"""Image filtering and feature extraction primitives."""

from src.imaging.filters import (
    fixed_filter,
    gabor_filter,
    gaussian_derivative,
    gaussian_filter,
    hog_image,
    lbp_image,
    pooled_combine,
)
from src.imaging.features import (
    combine_features,
    concat_images,
    dense_sift_features,
    filter_and_flatten,
    histogram_features,
    hog_features,
    lbp_features,
)

__all__ = [
    "fixed_filter",
    "gabor_filter",
    "gaussian_derivative",
    "gaussian_filter",
    "hog_image",
    "lbp_image",
    "pooled_combine",
    "combine_features",
    "concat_images",
    "dense_sift_features",
    "filter_and_flatten",
    "histogram_features",
    "hog_features",
    "lbp_features",
]
