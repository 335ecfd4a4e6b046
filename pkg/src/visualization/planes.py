"""Debug dumps of image planes as ASCII portable graymaps."""

from pathlib import Path

import numpy as np


def rescale_to_bytes(plane: np.ndarray) -> np.ndarray:
    """Affine map of the plane's value range onto 0..255; constant planes map to 0."""
    lo, hi = float(plane.min()), float(plane.max())
    if hi == lo:
        return np.zeros(plane.shape, dtype=np.uint8)
    return np.rint((plane - lo) / (hi - lo) * 255).astype(np.uint8)


def write_pgm_p2(plane: np.ndarray, path: Path) -> Path:
    """Write one (h, w) plane as a P2 (plain text) PGM file."""
    path = Path(path)
    pixels = rescale_to_bytes(np.asarray(plane, dtype=np.float64))
    h, w = pixels.shape
    rows = "\n".join(" ".join(str(v) for v in row) for row in pixels)
    path.write_text(f"P2\n{w} {h}\n255\n{rows}\n", encoding="ascii")
    return path
