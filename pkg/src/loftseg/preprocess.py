"""Preprocessing chain: ghost-artifact removal, anisotropic diffusion with an
image-derived edge threshold, speckle-index verification, and multiplicative
bias-field correction.

Conventions fixed here (documented, not configurable):

* The auto edge threshold is ``k = 2 * ln(m*n) * sqrt(mean) / std`` with the
  natural logarithm and the population standard deviation, computed once on
  the ghost-removed image, not per iteration.
* Diffusion is the explicit 4-neighbor scheme with replicated borders; the
  conductance is ``exp(-(g/k)^2)`` of the neighbor difference g.
* The gain field is estimated by Gaussian smoothing restricted to the body
  (outside-body pixels are excluded from every smoothing average), normalized
  to mean 1 over the body; the corrected image is the quotient, rescaled so
  the body mean is preserved exactly, then smoothed once more at final_sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .morphology import StructuringElement, binarize, dilate, erode
from .rasters import BinaryMask, FloatImage, GrayImage16


class NoForegroundError(ValueError):
    """Ghost removal found no body: the opened mask is empty."""


class DegenerateImageError(ValueError):
    """Constant image: the auto edge threshold k is undefined (std = 0)."""


@dataclass(frozen=True)
class GhostRemovalParams:
    binarize_threshold: int = 100
    se: StructuringElement = field(default_factory=lambda: StructuringElement("disk", 3))

    def __post_init__(self):
        if not 0 < self.binarize_threshold < 65535:
            raise ValueError("binarize_threshold must be in (0, 65535)")


@dataclass(frozen=True)
class DiffusionParams:
    """k=None lets the pipeline derive k from the image; diffuse() itself
    needs a concrete positive k."""

    k: float | None = None
    lam: float = 0.25
    iterations: int = 15

    def __post_init__(self):
        if self.k is not None and not self.k > 0:
            raise ValueError("k must be > 0")
        if not 0 < self.lam <= 0.25:
            raise ValueError("lambda must be in (0, 0.25] for a stable explicit scheme")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass(frozen=True)
class BiasParams:
    """gain_sigma=None lets the pipeline default to width/8."""

    gain_sigma: float | None = None
    final_sigma: float = 1.0
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.final_sigma < 0:
            raise ValueError("final_sigma must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.gain_sigma is not None:
            if self.gain_sigma <= 0:
                raise ValueError("gain_sigma must be > 0")
            if not self.gain_sigma > self.final_sigma:
                raise ValueError("gain_sigma must exceed final_sigma (gain is the slower field)")


def remove_ghost_artifacts(
    image: GrayImage16, params: GhostRemovalParams | None = None
) -> tuple[GrayImage16, BinaryMask]:
    """Mask out stray low-intensity signal outside the body.

    The body mask is dilate(erode(binarize(image, t))); the returned image
    keeps original intensities inside the mask and is 0 outside.
    """
    params = params or GhostRemovalParams()
    body = dilate(erode(binarize(image, params.binarize_threshold), params.se), params.se)
    if not body.bits.any():
        raise NoForegroundError("no foreground detected")
    masked = np.where(body.bits, image.pixels, np.uint16(0))
    return GrayImage16(masked), body


def compute_k(image: GrayImage16) -> float:
    """Image-derived edge magnitude threshold: 2*ln(m*n)*sqrt(mean)/std."""
    px = image.pixels.astype(np.float64)
    std = float(px.std())
    if std == 0.0:
        raise DegenerateImageError("degenerate image for auto-k")
    return 2.0 * math.log(px.size) * math.sqrt(float(px.mean())) / std


def _neighbor_diffs(v: np.ndarray):
    """Differences to N/S/E/W neighbors with replicated borders (zero flux)."""
    n = np.vstack([v[:1], v[:-1]]) - v
    s = np.vstack([v[1:], v[-1:]]) - v
    w = np.hstack([v[:, :1], v[:, :-1]]) - v
    e = np.hstack([v[:, 1:], v[:, -1:]]) - v
    return n, s, e, w


def diffuse(image: GrayImage16 | FloatImage, params: DiffusionParams) -> FloatImage:
    """Edge-preserving smoothing by the explicit 4-neighbor scheme.

    Per iteration: v += lam * sum_d exp(-(g_d/k)^2) * g_d over the four
    neighbor differences g_d. iterations=0 returns the input as floats.
    """
    if params.k is None:
        raise ValueError("diffuse requires a concrete k; use the pipeline for auto-k")
    v = image.to_float().values.copy() if isinstance(image, GrayImage16) else image.values.copy()
    inv_k2 = 1.0 / (params.k * params.k)
    for _ in range(params.iterations):
        flux = np.zeros_like(v)
        for g in _neighbor_diffs(v):
            flux += np.exp(-(g * g) * inv_k2) * g
        v += params.lam * flux
    return FloatImage(v)


def speckle_index(image: FloatImage, window: int = 3) -> float:
    """Mean local coefficient of variation (sigma/mu) over all fully interior
    window positions, skipping windows with non-positive mean."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    v = image.values
    h, w = v.shape
    if window > h or window > w:
        raise ValueError(f"window {window} does not fit image {w}x{h}")

    def box_sums(a):
        c = np.cumsum(np.cumsum(a, axis=0), axis=1)
        c = np.pad(c, ((1, 0), (1, 0)))
        return (
            c[window:, window:]
            - c[:-window, window:]
            - c[window:, :-window]
            + c[:-window, :-window]
        )

    area = window * window
    mu = box_sums(v) / area
    var = box_sums(v * v) / area - mu * mu
    sel = mu > 0
    if not sel.any():
        raise ValueError("no window with positive mean")
    sigma = np.sqrt(np.maximum(var[sel], 0.0))
    return float(np.mean(sigma / mu[sel]))


def _masked_gaussian(values: np.ndarray, mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian smoothing that averages only in-mask pixels; 0 outside."""
    m = mask.astype(np.float64)
    num = ndimage.gaussian_filter(values * m, sigma)
    den = ndimage.gaussian_filter(m, sigma)
    out = np.zeros_like(values)
    inside = mask & (den > 0)
    out[inside] = num[inside] / den[inside]
    return out


def correct_bias(image: FloatImage, body: BinaryMask, params: BiasParams) -> FloatImage:
    """Divide out a smooth multiplicative gain field.

    The gain estimate is the body-restricted Gaussian smoothing of the image,
    normalized to mean 1 over the body. A uniform gain is unrecoverable by
    design: the mean-one constraint absorbs any global scale.
    """
    if params.gain_sigma is None:
        raise ValueError("correct_bias requires a concrete gain_sigma")
    if params.final_sigma > 0 and not params.gain_sigma > params.final_sigma:
        raise ValueError("gain_sigma must exceed final_sigma")
    bits = body.bits
    if not bits.any():
        raise ValueError("body mask is empty")
    v = image.values
    if float(v.min()) < 0:
        raise ValueError("image must be non-negative")

    g_raw = _masked_gaussian(v, bits, params.gain_sigma)
    g_mean = float(g_raw[bits].mean())
    if g_mean <= 0:
        raise ValueError("degenerate gain estimate")
    g_hat = g_raw / g_mean

    out = np.zeros_like(v)
    out[bits] = v[bits] / np.maximum(g_hat[bits], params.epsilon)
    # Pin the body mean to the input's so the quotient only reshapes, never
    # rescales, the intensity distribution.
    out_mean = float(out[bits].mean())
    if out_mean > 0:
        out[bits] *= float(v[bits].mean()) / out_mean
    if params.final_sigma > 0:
        out = _masked_gaussian(out, bits, params.final_sigma)
    return FloatImage(out)


@dataclass(frozen=True)
class PreprocessResult:
    """Pipeline output; the diagnostics are None only when an already
    preprocessed image is wrapped without running the pipeline."""

    image: GrayImage16
    body: BinaryMask
    k: float | None
    speckle_before: float | None
    speckle_after: float | None


def preprocess_pipeline(
    image: GrayImage16,
    ghost: GhostRemovalParams | None = None,
    diffusion: DiffusionParams | None = None,
    bias: BiasParams | None = None,
) -> PreprocessResult:
    """Ghost removal, auto-k diffusion, bias correction, then rounding back
    to 16-bit integers with zeros outside the body. Fully deterministic."""
    ghost = ghost or GhostRemovalParams()
    diffusion = diffusion or DiffusionParams()
    bias = bias or BiasParams()

    masked, body = remove_ghost_artifacts(image, ghost)
    k = diffusion.k if diffusion.k is not None else compute_k(masked)
    diff_params = DiffusionParams(k=k, lam=diffusion.lam, iterations=diffusion.iterations)

    before = masked.to_float()
    si_before = speckle_index(before)
    diffused = diffuse(masked, diff_params)
    si_after = speckle_index(diffused)

    gain_sigma = bias.gain_sigma if bias.gain_sigma is not None else image.width / 8
    bias_params = BiasParams(gain_sigma=gain_sigma, final_sigma=bias.final_sigma, epsilon=bias.epsilon)
    corrected = correct_bias(diffused, body, bias_params)

    rounded = np.clip(np.floor(corrected.values + 0.5), 0, 65535).astype(np.uint16)
    rounded[~body.bits] = 0
    return PreprocessResult(
        image=GrayImage16(rounded),
        body=body,
        k=float(k),
        speckle_before=si_before,
        speckle_after=si_after,
    )
