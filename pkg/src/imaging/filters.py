"""
Image-filtering primitives.

Every function accepts a single plane (h, w) or a stack of planes (n, h, w)
and filters each plane independently. Window operations use ``reflect``
borders (d c b a | a b c d).
"""

from typing import Callable
import math

import numpy as np
from scipy import ndimage
from skimage.filters import gabor_kernel

from src.errors import DomainError

MODE = "reflect"
HOG_CELL = 8
HOG_EPS = 1e-8
LBP_RADIUS = 1.5
LBP_POINTS = 8
LBP_LABELS = 59

LAPLACE_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


def as_stack(img: np.ndarray) -> tuple[np.ndarray, bool]:
    """Return (n, h, w) float64 view and whether the input was a single plane."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr[np.newaxis], True
    if arr.ndim != 3:
        raise ValueError(f"expected (h, w) or (n, h, w) image, got shape {arr.shape}")
    return arr, False


def _restore(out: np.ndarray, single: bool) -> np.ndarray:
    return out[0] if single else out


def planewise(fn: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    """Lift an (n, h, w) -> (n, h', w') function to also accept single planes."""
    def wrapper(img: np.ndarray, *args, **kwargs) -> np.ndarray:
        stack, single = as_stack(img)
        return _restore(fn(stack, *args, **kwargs), single)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _convolve2d(stack: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.convolve(stack, kernel[np.newaxis], mode=MODE)


# ---------------------------------------------------------------------------
# Fixed filters
# ---------------------------------------------------------------------------

@planewise
def mean_filter(stack: np.ndarray) -> np.ndarray:
    return ndimage.uniform_filter(stack, size=(1, 3, 3), mode=MODE)


@planewise
def median_filter(stack: np.ndarray) -> np.ndarray:
    return ndimage.median_filter(stack, size=(1, 3, 3), mode=MODE)


@planewise
def min_filter(stack: np.ndarray) -> np.ndarray:
    return ndimage.minimum_filter(stack, size=(1, 3, 3), mode=MODE)


@planewise
def max_filter(stack: np.ndarray) -> np.ndarray:
    return ndimage.maximum_filter(stack, size=(1, 3, 3), mode=MODE)


@planewise
def laplace_filter(stack: np.ndarray) -> np.ndarray:
    return _convolve2d(stack, LAPLACE_KERNEL)


@planewise
def log_filter(stack: np.ndarray, sigma: float) -> np.ndarray:
    """Laplacian of Gaussian: sum of the second Gaussian derivatives along y and x."""
    yy = ndimage.gaussian_filter(stack, sigma=(0, sigma, sigma), order=(0, 2, 0), mode=MODE, truncate=3.0)
    xx = ndimage.gaussian_filter(stack, sigma=(0, sigma, sigma), order=(0, 0, 2), mode=MODE, truncate=3.0)
    return yy + xx


def sobel_components(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _convolve2d(stack, SOBEL_X), _convolve2d(stack, SOBEL_Y)


@planewise
def sobel_filter(stack: np.ndarray) -> np.ndarray:
    gx, gy = sobel_components(stack)
    return np.hypot(gx, gy)


@planewise
def sqrt_filter(stack: np.ndarray) -> np.ndarray:
    out = np.ones_like(stack)
    positive = stack >= 0
    out[positive] = np.sqrt(stack[positive])
    return out


@planewise
def relu_filter(stack: np.ndarray) -> np.ndarray:
    return np.maximum(stack, 0.0)


# ---------------------------------------------------------------------------
# Parameterised filters
# ---------------------------------------------------------------------------

def _check_sigma(sigma: float) -> None:
    if sigma not in (1, 2, 3):
        raise DomainError(f"sigma must be 1, 2 or 3, got {sigma}")


@planewise
def gaussian_filter(stack: np.ndarray, sigma: int) -> np.ndarray:
    """Normalised Gaussian smoothing with kernel radius 3*sigma."""
    _check_sigma(sigma)
    return ndimage.gaussian_filter(stack, sigma=(0, sigma, sigma), mode=MODE, truncate=3.0)


@planewise
def gaussian_derivative(stack: np.ndarray, sigma: int, o1: int, o2: int) -> np.ndarray:
    """Gaussian derivative of order ``o1`` along x (columns) and ``o2`` along y (rows)."""
    _check_sigma(sigma)
    if o1 not in (0, 1, 2) or o2 not in (0, 1, 2):
        raise DomainError(f"derivative orders must be in 0..2, got ({o1}, {o2})")
    return ndimage.gaussian_filter(
        stack, sigma=(0, sigma, sigma), order=(0, o2, o1), mode=MODE, truncate=3.0
    )


def gabor_real_kernel(theta: float, frequency: float) -> np.ndarray:
    """Real part of a one-octave Gabor kernel; sigma follows from the frequency."""
    return np.real(gabor_kernel(frequency, theta=theta, bandwidth=1, n_stds=3))


@planewise
def gabor_filter(stack: np.ndarray, theta: float, frequency: float) -> np.ndarray:
    return _convolve2d(stack, gabor_real_kernel(theta, frequency))


# ---------------------------------------------------------------------------
# LBP and HOG images
# ---------------------------------------------------------------------------

def _uniform_lookup() -> np.ndarray:
    """Map 8-bit codes to labels: uniform patterns 0..57 by code, others 58."""
    lookup = np.full(256, LBP_LABELS - 1, dtype=np.int64)
    label = 0
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(LBP_POINTS)]
        transitions = sum(bits[i] != bits[(i + 1) % LBP_POINTS] for i in range(LBP_POINTS))
        if transitions <= 2:
            lookup[code] = label
            label += 1
    return lookup


UNIFORM_LOOKUP = _uniform_lookup()
ALL_ONES_LABEL = int(UNIFORM_LOOKUP[255])


def lbp_offsets() -> list[tuple[float, float]]:
    """(dy, dx) of the 8 circular neighbours, starting east and turning counter-clockwise."""
    offsets = []
    for p in range(LBP_POINTS):
        angle = 2 * math.pi * p / LBP_POINTS
        dy = round(-LBP_RADIUS * math.sin(angle), 10)
        dx = round(LBP_RADIUS * math.cos(angle), 10)
        offsets.append((dy, dx))
    return offsets


def lbp_labels(stack: np.ndarray) -> np.ndarray:
    """Uniform LBP label (0..58) of every pixel of an (n, h, w) stack."""
    stack, _ = as_stack(stack)
    pad = int(math.ceil(LBP_RADIUS))
    padded = np.pad(stack, ((0, 0), (pad, pad), (pad, pad)), mode="symmetric")
    _, h, w = stack.shape
    center = stack
    codes = np.zeros(stack.shape, dtype=np.int64)

    for bit, (dy, dx) in enumerate(lbp_offsets()):
        y0, x0 = math.floor(dy), math.floor(dx)
        fy, fx = dy - y0, dx - x0
        diff = np.zeros_like(stack)
        for oy, wy in ((y0, 1 - fy), (y0 + 1, fy)):
            for ox, wx in ((x0, 1 - fx), (x0 + 1, fx)):
                weight = wy * wx
                if weight == 0:
                    continue
                window = padded[:, pad + oy: pad + oy + h, pad + ox: pad + ox + w]
                # interpolate differences so equal pixels compare exactly
                diff += weight * (window - center)
        codes |= (diff >= 0).astype(np.int64) << bit

    return UNIFORM_LOOKUP[codes]


@planewise
def lbp_image(stack: np.ndarray) -> np.ndarray:
    return lbp_labels(stack).astype(np.float64) / (LBP_LABELS - 1)


def gradient_magnitude(stack: np.ndarray) -> np.ndarray:
    """Central-difference gradient magnitude with reflect borders."""
    gx = ndimage.correlate1d(stack, [-0.5, 0.0, 0.5], axis=-1, mode=MODE)
    gy = ndimage.correlate1d(stack, [-0.5, 0.0, 0.5], axis=-2, mode=MODE)
    return np.hypot(gx, gy)


def cell_normalize(values: np.ndarray, cell: int = HOG_CELL, eps: float = HOG_EPS) -> np.ndarray:
    """Divide each value by the L2 norm (+eps) of its cell; edge cells may be partial."""
    n, h, w = values.shape
    ch, cw = -(-h // cell), -(-w // cell)
    padded = np.zeros((n, ch * cell, cw * cell))
    padded[:, :h, :w] = values
    blocks = padded.reshape(n, ch, cell, cw, cell)
    norms = np.sqrt((blocks ** 2).sum(axis=(2, 4), keepdims=True)) + eps
    return (blocks / norms).reshape(n, ch * cell, cw * cell)[:, :h, :w]


@planewise
def hog_image(stack: np.ndarray) -> np.ndarray:
    return cell_normalize(gradient_magnitude(stack))


# ---------------------------------------------------------------------------
# Pooled combination
# ---------------------------------------------------------------------------

def max_pool(stack: np.ndarray) -> np.ndarray:
    """2x2 max pooling, stride 2; odd trailing rows/columns dropped, size-1 axes kept."""
    n, h, w = stack.shape
    out = stack
    if h >= 2:
        out = out[:, : 2 * (h // 2), :].reshape(n, h // 2, 2, out.shape[2]).max(axis=2)
    if w >= 2:
        hh = out.shape[1]
        out = out[:, :, : 2 * (w // 2)].reshape(n, hh, w // 2, 2).max(axis=3)
    return out


def center_crop(stack: np.ndarray, height: int, width: int) -> np.ndarray:
    _, h, w = stack.shape
    top, left = (h - height) // 2, (w - width) // 2
    return stack[:, top: top + height, left: left + width]


def _reconcile(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if a.shape[1:] == b.shape[1:]:
        return max_pool(a), max_pool(b)

    swap = a.shape[1] * a.shape[2] < b.shape[1] * b.shape[2]
    large, small = (b, a) if swap else (a, b)
    while large.shape[1] > small.shape[1] or large.shape[2] > small.shape[2]:
        pooled = max_pool(large)
        if pooled.shape == large.shape:
            break
        large = pooled
    height = min(large.shape[1], small.shape[1])
    width = min(large.shape[2], small.shape[2])
    large, small = center_crop(large, height, width), center_crop(small, height, width)
    return (small, large) if swap else (large, small)


def pooled_combine(kind: str, img_a: np.ndarray, img_b: np.ndarray) -> np.ndarray:
    """``Add_MaxP`` (a + b) or ``Sub_MaxP`` (a - b) after pooling/cropping to a common size."""
    a, single = as_stack(img_a)
    b, _ = as_stack(img_b)
    a, b = _reconcile(a, b)
    if kind == "Add_MaxP":
        out = a + b
    elif kind == "Sub_MaxP":
        out = a - b
    else:
        raise ValueError(f"unknown pooled combination {kind}")
    return _restore(out, single)


FIXED_FILTERS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "Mean": mean_filter,
    "Median": median_filter,
    "Min": min_filter,
    "Max": max_filter,
    "Lap": laplace_filter,
    "LoG1": lambda img: log_filter(img, 1),
    "LoG2": lambda img: log_filter(img, 2),
    "Sobel": sobel_filter,
    "Sqrt": sqrt_filter,
    "ReLU": relu_filter,
    "HOG_F": hog_image,
    "LBP_F": lbp_image,
}


def fixed_filter(kind: str, img: np.ndarray) -> np.ndarray:
    try:
        fn = FIXED_FILTERS[kind]
    except KeyError:
        raise ValueError(f"unknown filter {kind}") from None
    return fn(img)
