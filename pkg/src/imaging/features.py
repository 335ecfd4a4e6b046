"""
Feature-extraction and concatenation primitives.

Inputs are plane stacks (n, h, w) or single planes; outputs are feature
matrices (n, k) or single vectors (k,).
"""

from typing import Sequence
import logging
import math

import numpy as np
from scipy import ndimage

from src.imaging.filters import (
    LBP_LABELS,
    MODE,
    as_stack,
    gabor_filter,
    gaussian_derivative,
    gaussian_filter,
    hog_image,
    lbp_image,
    lbp_labels,
    sobel_filter,
)

logger = logging.getLogger(__name__)

HIST_BINS = 256
HOG_BLOCK = 4
SIFT_SPATIAL = 4
SIFT_ORIENTATIONS = 8
SIFT_CLIP = 0.2
SIFT_MIN_SIDE = 16


def _restore(out: np.ndarray, single: bool) -> np.ndarray:
    return out[0] if single else out


def flatten(img: np.ndarray) -> np.ndarray:
    stack, single = as_stack(img)
    return _restore(stack.reshape(stack.shape[0], -1), single)


def histogram_features(img: np.ndarray) -> np.ndarray:
    """256-bin normalised histogram over [min(0, lo), max(1, hi)] of each plane."""
    stack, single = as_stack(img)
    n = stack.shape[0]
    flat = stack.reshape(n, -1)
    lo = np.minimum(0.0, flat.min(axis=1, keepdims=True))
    hi = np.maximum(1.0, flat.max(axis=1, keepdims=True))
    bins = np.floor((flat - lo) / (hi - lo) * HIST_BINS).astype(np.int64)
    bins = np.clip(bins, 0, HIST_BINS - 1)
    offsets = (np.arange(n) * HIST_BINS)[:, np.newaxis]
    counts = np.bincount((bins + offsets).ravel(), minlength=n * HIST_BINS)
    return _restore(counts.reshape(n, HIST_BINS) / flat.shape[1], single)


def block_means(stack: np.ndarray, block: int) -> np.ndarray:
    """Means of non-overlapping block x block tiles in row-major order; remainder dropped."""
    n, h, w = stack.shape
    bh, bw = h // block, w // block
    tiles = stack[:, : bh * block, : bw * block].reshape(n, bh, block, bw, block)
    return tiles.mean(axis=(2, 4)).reshape(n, bh * bw)


def hog_features(img: np.ndarray) -> np.ndarray:
    stack, single = as_stack(img)
    hog = hog_image(stack)
    _, h, w = stack.shape
    if h < HOG_BLOCK or w < HOG_BLOCK:
        logger.debug("HOG features on %dx%d image fall back to the global mean", w, h)
        return _restore(hog.reshape(hog.shape[0], -1).mean(axis=1, keepdims=True), single)
    return _restore(block_means(hog, HOG_BLOCK), single)


def lbp_features(img: np.ndarray) -> np.ndarray:
    """59-bin normalised histogram of uniform LBP labels."""
    stack, single = as_stack(img)
    n = stack.shape[0]
    labels = lbp_labels(stack).reshape(n, -1)
    offsets = (np.arange(n) * LBP_LABELS)[:, np.newaxis]
    counts = np.bincount((labels + offsets).ravel(), minlength=n * LBP_LABELS)
    return _restore(counts.reshape(n, LBP_LABELS) / labels.shape[1], single)


def _sift_gradients(patch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(patch, [-0.5, 0.0, 0.5], axis=-1, mode=MODE)
    gy = ndimage.correlate1d(patch, [-0.5, 0.0, 0.5], axis=-2, mode=MODE)
    return np.hypot(gx, gy), np.mod(np.arctan2(gy, gx), 2 * math.pi)


def dense_sift_features(img: np.ndarray) -> np.ndarray:
    """
    One 128-dimensional SIFT descriptor centred on each image.

    A centred square patch of side min(w, h) is split into 4x4 spatial cells with
    8 orientation bins; gradient magnitudes are Gaussian-weighted and spread by
    trilinear interpolation, then L2-normalised, clipped at 0.2 and renormalised.
    Images with a side below 16 use the whole h x w extent, each axis cut into
    four proportionally scaled bins.
    """
    stack, single = as_stack(img)
    n, h, w = stack.shape
    if min(h, w) < SIFT_MIN_SIDE:
        logger.debug("SIFT on %dx%d image uses the whole image with scaled bins", w, h)
        ph, pw = h, w
    else:
        ph = pw = min(h, w)
    top, left = (h - ph) // 2, (w - pw) // 2
    patch = stack[:, top: top + ph, left: left + pw]

    magnitude, angle = _sift_gradients(patch)
    cy = np.arange(ph) - (ph - 1) / 2
    cx = np.arange(pw) - (pw - 1) / 2
    window = np.exp(
        -(cy[:, None] ** 2 / (2 * (ph / 2) ** 2) + cx[None, :] ** 2 / (2 * (pw / 2) ** 2))
    )
    weight = magnitude * window

    ys, xs = np.meshgrid(np.arange(ph), np.arange(pw), indexing="ij")
    by = (ys + 0.5) / (ph / SIFT_SPATIAL) - 0.5
    bx = (xs + 0.5) / (pw / SIFT_SPATIAL) - 0.5
    bo = angle * SIFT_ORIENTATIONS / (2 * math.pi)

    y0, x0 = np.floor(by).astype(np.int64), np.floor(bx).astype(np.int64)
    o0 = np.floor(bo).astype(np.int64)
    fy, fx, fo = by - y0, bx - x0, bo - o0

    hist = np.zeros((n, SIFT_SPATIAL, SIFT_SPATIAL, SIFT_ORIENTATIONS))
    sample = np.broadcast_to(np.arange(n)[:, None, None], weight.shape)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        yi = y0 + dy
        for dx, wx in ((0, 1 - fx), (1, fx)):
            xi = x0 + dx
            inside = (yi >= 0) & (yi < SIFT_SPATIAL) & (xi >= 0) & (xi < SIFT_SPATIAL)
            spatial = wy * wx * inside
            yc = np.clip(yi, 0, SIFT_SPATIAL - 1)
            xc = np.clip(xi, 0, SIFT_SPATIAL - 1)
            for do, wo in ((0, 1 - fo), (1, fo)):
                oi = np.mod(o0 + do, SIFT_ORIENTATIONS)
                contrib = weight * spatial * wo
                np.add.at(
                    hist,
                    (sample, np.broadcast_to(yc, weight.shape),
                     np.broadcast_to(xc, weight.shape), oi),
                    contrib,
                )

    descriptor = hist.reshape(n, -1)
    descriptor = _normalize(descriptor)
    descriptor = _normalize(np.minimum(descriptor, SIFT_CLIP))
    return _restore(descriptor, single)


def _normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return rows / safe


def concat_images(img_a: np.ndarray, img_b: np.ndarray) -> np.ndarray:
    """Row-major flatten of a followed by b."""
    a, single = as_stack(img_a)
    b, _ = as_stack(img_b)
    out = np.concatenate([a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1)], axis=1)
    return _restore(out, single)


def filter_and_flatten(kind: str, img: np.ndarray, *params) -> np.ndarray:
    """Apply the filter behind an ``*_FE`` primitive and flatten row-major."""
    if kind == "LBP_FE":
        filtered = lbp_image(img)
    elif kind == "HOG_FE":
        filtered = hog_image(img)
    elif kind == "Sobel_FE":
        filtered = sobel_filter(img)
    elif kind == "Gabor_FE":
        theta, frequency = params
        filtered = gabor_filter(img, theta, frequency)
    elif kind == "Gau_FE":
        (sigma,) = params
        filtered = gaussian_filter(img, sigma)
    elif kind == "GauD_FE":
        sigma, o1, o2 = params
        filtered = gaussian_derivative(img, sigma, o1, o2)
    else:
        raise ValueError(f"unknown flattening extractor {kind}")
    return flatten(filtered)


def combine_features(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate 2 to 4 feature matrices in child order."""
    if not 2 <= len(vectors) <= 4:
        raise ValueError(f"Comb takes 2 to 4 inputs, got {len(vectors)}")
    return np.concatenate(list(vectors), axis=-1)
