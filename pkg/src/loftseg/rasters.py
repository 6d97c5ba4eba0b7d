"""Core raster containers shared by the whole pipeline.

All containers are immutable after construction (their numpy buffers are
marked read-only), so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_INTENSITY = 65535


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr or out.base is not None:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GrayImage16:
    """Row-major raster of 16-bit intensities, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {px.shape}")
        if px.dtype != np.uint16:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError(f"intensities must be integers, got dtype {px.dtype}")
            if px.min() < 0 or px.max() > MAX_INTENSITY:
                raise ValueError("intensity out of [0, 65535]")
            px = px.astype(np.uint16)
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_float(self) -> "FloatImage":
        return FloatImage(self.pixels.astype(np.float64))


@dataclass(frozen=True, eq=False)
class FloatImage:
    """Real-valued raster used inside diffusion and bias correction."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel boolean raster."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.dtype != np.bool_:
            b = b.astype(bool)
        if b.ndim != 2 or b.shape[0] < 1 or b.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D mask, got shape {b.shape}")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class ImageStats:
    """Whole-image statistics. std is the population standard deviation
    (divide by N), which stays well defined for a single pixel."""

    mean: float
    std: float
    min: int
    max: int


def image_stats(image: GrayImage16) -> ImageStats:
    """Mean, population std and range of all pixels."""
    px = image.pixels.astype(np.float64)
    return ImageStats(
        mean=float(px.mean()),
        std=float(px.std()),
        min=int(image.pixels.min()),
        max=int(image.pixels.max()),
    )
