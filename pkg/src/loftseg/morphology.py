"""Binary morphology used by ghost-artifact removal.

Border convention for both erosion and dilation: positions outside the image
are treated as 0, so erosion clears foreground whose footprint sticks out and
dilation gains nothing from the border.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .rasters import BinaryMask, GrayImage16

SHAPES = ("disk", "square", "cross")


@dataclass(frozen=True)
class StructuringElement:
    shape: str
    radius: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    def footprint(self) -> np.ndarray:
        """Symmetric (2r+1)x(2r+1) boolean footprint centered on the origin."""
        r = self.radius
        yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
        if self.shape == "disk":
            return (yy * yy + xx * xx) <= r * r
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        return (yy == 0) | (xx == 0)  # cross: plus-shaped arms


def binarize(image: GrayImage16, threshold: int) -> BinaryMask:
    """Bit set iff pixel >= threshold."""
    return BinaryMask(image.pixels >= threshold)


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Output bit set iff every footprint neighbor is set (out-of-image = 0)."""
    out = ndimage.binary_erosion(mask.bits, structure=se.footprint(), border_value=0)
    return BinaryMask(out)


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Output bit set iff any footprint neighbor is set (out-of-image = 0)."""
    out = ndimage.binary_dilation(mask.bits, structure=se.footprint(), border_value=0)
    return BinaryMask(out)
