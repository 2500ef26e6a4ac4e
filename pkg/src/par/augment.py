"""Deterministic affine augmentation and dataset upsampling.

Each source image yields ``replicas_per_image`` geometric replicas that
inherit the parent's label vector unchanged. Randomness is keyed per
(seed, parent_id, replica_index), never per worker or call order, so a
full augmentation run is a pure function of (manifest, config) and can be
parallelized without changing its output.

Transform composition is fixed: horizontal flip first, then scale, rotate
and shear anchored at the image center (in that order), then translation.
Sampling is bilinear with nearest-edge fill for out-of-bounds reads.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabeledSample
from .errors import ParError
from .imaging import load_image, require_image, sample_bilinear, to_uint8

DEFAULT_ROTATION_DEG = 25.0
DEFAULT_SHIFT_FRACTION = 0.15
DEFAULT_SHEAR = 0.5
DEFAULT_ZOOM = 0.5
DEFAULT_REPLICAS = 12


@dataclass(frozen=True)
class AugmentationConfig:
    """Parameter half-ranges for the affine pipeline.

    ``zoom`` is a fractional half-range: the isotropic scale factor is drawn
    from [1 - zoom, 1 + zoom]. ``shear_intensity`` is the half-range of the
    dimensionless shear coefficient s in x' = x + s*y.
    """

    rotation_deg: float = DEFAULT_ROTATION_DEG
    width_shift: float = DEFAULT_SHIFT_FRACTION
    height_shift: float = DEFAULT_SHIFT_FRACTION
    shear_intensity: float = DEFAULT_SHEAR
    zoom: float = DEFAULT_ZOOM
    horizontal_flip: bool = True
    fill_mode: str = "nearest"
    replicas_per_image: int = DEFAULT_REPLICAS
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("rotation_deg", "width_shift", "height_shift", "shear_intensity", "zoom"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.zoom >= 1.0:
            raise ValueError("zoom half-range must be < 1 so scale stays positive")
        if self.replicas_per_image < 0:
            raise ValueError("replicas_per_image must be >= 0")
        if self.fill_mode != "nearest":
            raise ValueError(f"unsupported fill_mode {self.fill_mode!r}")


@dataclass(frozen=True)
class AffineParams:
    angle_deg: float
    dx: float
    dy: float
    shear: float
    scale: float
    flipped: bool


@dataclass(frozen=True)
class AugmentedImage:
    parent_id: str
    replica_index: int
    pixels: np.ndarray
    params: AffineParams
    labels: tuple[int, ...]


def _replica_rng(seed: int, parent_id: str, replica_index: int) -> np.random.Generator:
    digest = hashlib.blake2b(parent_id.encode("utf-8"), digest_size=8).digest()
    key = int.from_bytes(digest, "big")
    return np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, key, replica_index])
    )


def sample_affine(
    config: AugmentationConfig,
    parent_id: str,
    replica_index: int,
    width: int,
    height: int,
) -> AffineParams:
    """Draw affine parameters for one replica of one image.

    Every field is uniform over its configured range. The PRNG is keyed by
    (config.seed, parent_id, replica_index), so repeat calls are identical.
    Shift ranges are fractions of the given image size, stored as pixels.
    """
    if replica_index < 1:
        raise ValueError("replica_index starts at 1")
    rng = _replica_rng(config.seed, parent_id, replica_index)
    angle = rng.uniform(-config.rotation_deg, config.rotation_deg)
    dx = rng.uniform(-config.width_shift * width, config.width_shift * width)
    dy = rng.uniform(-config.height_shift * height, config.height_shift * height)
    shear = rng.uniform(-config.shear_intensity, config.shear_intensity)
    scale = rng.uniform(1.0 - config.zoom, 1.0 + config.zoom)
    flipped = bool(config.horizontal_flip and rng.random() < 0.5)
    return AffineParams(angle_deg=angle, dx=dx, dy=dy, shear=shear, scale=scale, flipped=flipped)


def _center_matrix(params: AffineParams) -> np.ndarray:
    """Forward 2x2 matrix for the center-anchored scale/rotate/shear."""
    theta = np.deg2rad(params.angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    scale_m = np.array([[params.scale, 0.0], [0.0, params.scale]])
    rot_m = np.array([[cos, -sin], [sin, cos]])
    shear_m = np.array([[1.0, params.shear], [0.0, 1.0]])
    # Applied to a point as scale, then rotate, then shear.
    return shear_m @ rot_m @ scale_m


def apply_affine(pixels: np.ndarray, params: AffineParams, fill_mode: str = "nearest") -> np.ndarray:
    """Warp an (H, W, 3) image by the given parameters.

    Output dimensions equal the input's. Implemented as an inverse map: for
    each output pixel center, the source coordinate is found by undoing
    translate, then the center-anchored matrix, then the flip, and sampled
    bilinearly with coordinates clamped to the image (nearest-edge fill).
    Integer inputs come back as uint8, float inputs stay float.
    """
    if fill_mode != "nearest":
        raise ValueError(f"unsupported fill_mode {fill_mode!r}")
    img = require_image(pixels)
    h, w = img.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    forward = _center_matrix(params)
    inverse = np.linalg.inv(forward)

    out_x, out_y = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    vx = out_x - cx - params.dx
    vy = out_y - cy - params.dy
    src_x = inverse[0, 0] * vx + inverse[0, 1] * vy + cx
    src_y = inverse[1, 0] * vx + inverse[1, 1] * vy + cy
    if params.flipped:
        src_x = (w - 1.0) - src_x

    warped = sample_bilinear(img, src_x, src_y)
    if np.issubdtype(img.dtype, np.integer):
        return to_uint8(warped)
    return warped.astype(img.dtype)


def identity_params() -> AffineParams:
    return AffineParams(angle_deg=0.0, dx=0.0, dy=0.0, shear=0.0, scale=1.0, flipped=False)


def augment_image(
    pixels: np.ndarray,
    labels: Sequence[int],
    parent_id: str,
    config: AugmentationConfig,
) -> list[AugmentedImage]:
    """All replicas of a single image, replica_index 1..replicas_per_image."""
    img = require_image(pixels)
    h, w = img.shape[:2]
    out = []
    for k in range(1, config.replicas_per_image + 1):
        params = sample_affine(config, parent_id, k, width=w, height=h)
        out.append(
            AugmentedImage(
                parent_id=parent_id,
                replica_index=k,
                pixels=apply_affine(img, params, config.fill_mode),
                params=params,
                labels=tuple(labels),
            )
        )
    return out


def augment_dataset(
    samples: Sequence[LabeledSample],
    config: AugmentationConfig,
    root: Path | None = None,
) -> list[AugmentedImage]:
    """Generate replicas for every sample, N * replicas_per_image in total.

    Replicas inherit their parent's labels unchanged; geometry is the only
    thing that varies. Image I/O errors are re-raised with the sample id
    attached. Originals are not included here; training pools retain them
    alongside the replicas (see the training CLI).
    """
    out: list[AugmentedImage] = []
    for sample in samples:
        path = Path(sample.image_path)
        if not path.is_absolute() and root is not None:
            path = root / path
        try:
            img = load_image(path)
        except Exception as exc:
            raise ParError(f"sample {sample.sample_id!r}: {exc}") from exc
        out.extend(augment_image(img, sample.labels, sample.sample_id, config))
    return out
