"""Synthetic 16-bit test images with exact ground truth.

Real scans are replaced by seeded phantoms: an elliptical body holding either
two intensity classes (a bright base with darker blobs) or a uniform intensity
band, plus optional lesion blobs, multiplicative noise and a horizontal gain
ramp.

Reproducibility: all randomness comes from numpy's PCG64 stream seeded with
``spec.seed``, and the draw order is fixed (blob geometry first, then the
class fields, then the noise field), so a spec generates bit-identical
phantoms on every platform.

Noise fields are spatially correlated (white noise smoothed at
``texture_scale`` pixels, then standardized), which mimics tissue texture:
unlike iid pixel noise it survives the pipeline's smoothing stages. Marginal
distributions stay exact: standardized fields are unit normal, and uniform
fields go through the normal CDF.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import ndtr

from .rasters import BinaryMask, GrayImage16


@dataclass(frozen=True)
class LesionBlob:
    cx: float
    cy: float
    r: float
    intensity: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("lesion radius must be > 0")
        if not 0 < self.intensity <= 65535:
            raise ValueError("lesion intensity must be in (0, 65535]")


@dataclass(frozen=True)
class PhantomSpec:
    seed: int
    width: int = 448
    height: int = 448
    body: tuple[float, float, float, float] | None = None  # cx, cy, rx, ry
    dark_mean: float = 450.0
    dark_sigma: float = 60.0
    bright_mean: float = 1100.0
    bright_sigma: float = 80.0
    blob_count: int = 40
    blob_radius: tuple[float, float] = (10.0, 20.0)
    band: tuple[float, float] | None = None  # uniform body base; disables the two classes
    lesions: tuple[LesionBlob, ...] = ()
    noise: float = 0.0  # multiplicative uniform half-width
    gain: tuple[float, float] = (1.0, 1.0)  # horizontal linear ramp
    texture_scale: float = 4.0  # correlation length of noise fields, px (0 = iid)

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("phantom must be at least 8x8")
        if self.band is None:
            sep = self.bright_mean - self.dark_mean
            if not sep > 3.0 * (self.dark_sigma + self.bright_sigma):
                raise ValueError("class means must be separated by > 3*(sigma1+sigma2)")
            if self.dark_sigma < 0 or self.bright_sigma < 0:
                raise ValueError("class sigmas must be >= 0")
            if self.blob_count < 0 or self.blob_radius[0] <= 0 or self.blob_radius[1] < self.blob_radius[0]:
                raise ValueError("bad blob geometry")
        else:
            if not 0 <= self.band[0] < self.band[1] <= 65535:
                raise ValueError("band must satisfy 0 <= lo < hi <= 65535")
        if not 0 <= self.noise < 1:
            raise ValueError("noise half-width must be in [0, 1)")
        if self.gain[0] <= 0 or self.gain[1] <= 0:
            raise ValueError("gain must be positive")
        if self.texture_scale < 0:
            raise ValueError("texture_scale must be >= 0")

    def body_ellipse(self) -> tuple[float, float, float, float]:
        if self.body is not None:
            return self.body
        return (self.width / 2, self.height / 2, 0.42 * self.width, 0.34 * self.height)


@dataclass(frozen=True)
class PhantomSet:
    image: GrayImage16
    body: BinaryMask
    dark_class: BinaryMask
    lesions: BinaryMask


def _unit_field(rng: np.random.Generator, shape: tuple[int, int], scale: float) -> np.ndarray:
    """Standardized noise field, optionally correlated at `scale` pixels."""
    f = rng.standard_normal(shape)
    if scale > 0:
        f = ndimage.gaussian_filter(f, scale)
    return (f - f.mean()) / f.std()


def generate(spec: PhantomSpec) -> PhantomSet:
    """Deterministic phantom plus exact ground-truth masks."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w]
    cx, cy, rx, ry = spec.body_ellipse()
    body = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0

    dark = np.zeros((h, w), dtype=bool)
    if spec.band is None:
        # Blob centers sit on a jittered grid over the body box rather than
        # pure Poisson positions: the dark class spreads evenly through the
        # body the way fibroglandular strands do, instead of clumping.
        r_lo, r_hi = spec.blob_radius
        n = spec.blob_count
        if n > 0:
            cols = int(math.ceil(math.sqrt(n)))
            rows = int(math.ceil(n / cols))
            x0, x1 = cx - 0.9 * rx, cx + 0.9 * rx
            y0, y1 = cy - 0.9 * ry, cy + 0.9 * ry
            cell_w = (x1 - x0) / cols
            cell_h = (y1 - y0) / rows
            placed = 0
            for row in range(rows):
                for col in range(cols):
                    if placed == n:
                        break
                    r = rng.uniform(r_lo, r_hi)
                    bx = x0 + (col + 0.5) * cell_w + rng.uniform(-0.5, 0.5) * cell_w
                    by = y0 + (row + 0.5) * cell_h + rng.uniform(-0.5, 0.5) * cell_h
                    dark |= (xx - bx) ** 2 + (yy - by) ** 2 <= r * r
                    placed += 1
        dark &= body
        img = spec.bright_mean + spec.bright_sigma * _unit_field(rng, (h, w), spec.texture_scale)
        dark_values = spec.dark_mean + spec.dark_sigma * _unit_field(rng, (h, w), spec.texture_scale)
        img = np.where(dark, dark_values, img)
    else:
        lo, hi = spec.band
        img = lo + (hi - lo) * ndtr(_unit_field(rng, (h, w), spec.texture_scale))

    lesions = np.zeros((h, w), dtype=bool)
    for blob in spec.lesions:
        m = (xx - blob.cx) ** 2 + (yy - blob.cy) ** 2 <= blob.r * blob.r
        lesions |= m
        img = np.where(m, blob.intensity, img)
    lesions &= body
    dark &= ~lesions

    if spec.noise > 0:
        u = ndtr(_unit_field(rng, (h, w), spec.texture_scale))
        img = img * ((1.0 - spec.noise) + 2.0 * spec.noise * u)

    g0, g1 = spec.gain
    if (g0, g1) != (1.0, 1.0):
        img = img * (g0 + (g1 - g0) * xx / max(w - 1, 1))

    img = np.where(body, img, 0.0)
    pixels = np.clip(np.floor(img + 0.5), 0, 65535).astype(np.uint16)
    return PhantomSet(
        image=GrayImage16(pixels),
        body=BinaryMask(body),
        dark_class=BinaryMask(dark),
        lesions=BinaryMask(lesions),
    )


def spec_to_dict(spec: PhantomSpec) -> dict:
    return {
        "seed": spec.seed,
        "width": spec.width,
        "height": spec.height,
        "body": list(spec.body) if spec.body is not None else None,
        "dark_mean": spec.dark_mean,
        "dark_sigma": spec.dark_sigma,
        "bright_mean": spec.bright_mean,
        "bright_sigma": spec.bright_sigma,
        "blob_count": spec.blob_count,
        "blob_radius": list(spec.blob_radius),
        "band": list(spec.band) if spec.band is not None else None,
        "lesions": [
            {"cx": b.cx, "cy": b.cy, "r": b.r, "intensity": b.intensity} for b in spec.lesions
        ],
        "noise": spec.noise,
        "gain": list(spec.gain),
        "texture_scale": spec.texture_scale,
    }


def spec_from_dict(data: dict) -> PhantomSpec:
    if "seed" not in data or data["seed"] is None:
        raise ValueError("phantom spec requires an explicit seed (runs must be reproducible)")
    known = dict(data)
    lesions = tuple(LesionBlob(**b) for b in known.pop("lesions", []))
    for key in ("body", "band", "blob_radius", "gain"):
        if known.get(key) is not None:
            known[key] = tuple(known[key])
    return PhantomSpec(lesions=lesions, **known)


def load_spec(path: str) -> PhantomSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def write_set(spec: PhantomSpec, out_dir: str) -> dict:
    """Generate and write image plus truth masks with a manifest; returns the
    manifest dictionary."""
    import os

    from .image_io import PGM16, write_image

    os.makedirs(out_dir, exist_ok=True)
    ph = generate(spec)
    files = {
        "image": "image.pgm",
        "body": "body.pgm",
        "dark_class": "dark_class.pgm",
        "lesions": "lesions.pgm",
    }
    write_image(ph.image, os.path.join(out_dir, files["image"]), PGM16)
    write_image(ph.body, os.path.join(out_dir, files["body"]), PGM16)
    write_image(ph.dark_class, os.path.join(out_dir, files["dark_class"]), PGM16)
    write_image(ph.lesions, os.path.join(out_dir, files["lesions"]), PGM16)
    manifest = {"generator": "pcg64", "spec": spec_to_dict(spec), "files": files}
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest
