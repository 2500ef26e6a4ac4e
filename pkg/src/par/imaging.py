"""Low-level image buffers and bilinear resampling.

Images are numpy arrays of shape (H, W, 3). Integer inputs are treated as
0..255 channel data. All resampling here uses bilinear interpolation with
half-pixel centers (pixel i covers [i, i+1), its center sits at i + 0.5)
and nearest-edge fill: sample coordinates are clamped to the image rect, so
out-of-bounds reads replicate the border pixel.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DecodeError, InvalidImage


def require_image(pixels: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) buffer, raising InvalidImage otherwise."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidImage(f"expected a non-empty HxWx3 image, got shape {arr.shape}")
    return arr


def load_image(path: str | Path) -> np.ndarray:
    """Read an image file as (H, W, 3) uint8, converting to RGB."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc


def decode_image(data: bytes) -> np.ndarray:
    """Decode raw image bytes to (H, W, 3) uint8."""
    import io

    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image bytes: {exc}") from exc


def save_png(pixels: np.ndarray, path: str | Path) -> None:
    arr = require_image(pixels).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def sample_bilinear(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample an image at fractional pixel-index coordinates.

    xs/ys hold x (column) and y (row) coordinates in pixel-index space
    (0 .. W-1 / 0 .. H-1). Coordinates outside the image are clamped to the
    border before interpolation, which yields nearest-edge fill.

    Returns float64 samples with the trailing channel axis, shaped like xs
    plus (3,).
    """
    img = require_image(pixels).astype(np.float64)
    h, w = img.shape[:2]

    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize to (out_h, out_w) with half-pixel-center bilinear sampling.

    Returns float64; callers quantize or normalize as needed. Identity sizes
    return an exact float copy of the input.
    """
    img = require_image(pixels)
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.astype(np.float64)

    # Map output pixel centers to input pixel-index coordinates.
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    grid_x, grid_y = np.meshgrid(xs, ys)
    return sample_bilinear(img, grid_x, grid_y)


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Round and clip a float image buffer back into 0..255 uint8."""
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
