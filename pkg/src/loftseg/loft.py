"""Spectrum-loft threshold selection and the segmentation pipelines on top.

The loft of a bimodal intensity histogram is the valley between its two
peaks. The threshold is the deepest local minimum of the (optionally
smoothed) histogram inside empirical intensity bounds:

1. choose the bound pair (lo, hi),
2. collect all local minima of the smoothed histogram strictly inside them,
3. pick the minimum with the smallest frequency; ties go to the lowest
   intensity.

Plateaus (runs of equal counts flanked by strictly larger neighbors on both
sides) contribute their center bin, lower-middle for even runs. Runs touching
the ends of the histogram have no flank on one side and are not minima; runs
sticking out of (lo, hi) are clipped to it before taking the center.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .preprocess import (
    BiasParams,
    DiffusionParams,
    GhostRemovalParams,
    PreprocessResult,
    preprocess_pipeline,
)
from .rasters import BinaryMask, GrayImage16

N_BINS = 65536

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True, eq=False)
class IntensityHistogram:
    """Per-intensity counts; one bin per representable 16-bit value."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_BINS,):
            raise ValueError(f"expected {N_BINS} bins, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        if int(c.sum()) != self.total:
            raise ValueError("total does not match sum of counts")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def max_intensity_present(self) -> int:
        nz = np.flatnonzero(self.counts)
        if nz.size == 0:
            raise ValueError("empty histogram")
        return int(nz[-1])

    def to_csv(self) -> str:
        lines = ["intensity,count"]
        lines.extend(f"{i},{int(c)}" for i, c in enumerate(self.counts))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LoftBounds:
    lo: int
    hi: int

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= 65535):
            raise ValueError(f"bounds must satisfy 0 <= lo < hi <= 65535, got ({self.lo}, {self.hi})")


@dataclass(frozen=True)
class ThresholdResult:
    threshold: int
    candidates: list[tuple[int, int]] = field(default_factory=list)
    smoothing_window: int = 1


@dataclass(frozen=True)
class LesionComponent:
    label: int
    pixel_count: int
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    centroid: tuple[float, float]  # (x, y)


@dataclass(frozen=True)
class LesionReport:
    threshold: int
    components: list[LesionComponent]
    min_area_applied: int


class NoLoftError(ValueError):
    """No local minimum exists inside the bounds."""

    def __init__(self, bounds: LoftBounds, histogram: IntensityHistogram):
        super().__init__(f"no loft found in [{bounds.lo},{bounds.hi}]")
        self.bounds = bounds
        self.histogram = histogram


def histogram(image: GrayImage16, mask: BinaryMask | None = None) -> IntensityHistogram:
    """Counts of every intensity, optionally restricted to mask pixels."""
    if mask is None:
        values = image.pixels.ravel()
    else:
        if mask.bits.shape != image.pixels.shape:
            raise ValueError("mask shape does not match image")
        values = image.pixels[mask.bits]
    counts = np.bincount(values, minlength=N_BINS).astype(np.int64)
    return IntensityHistogram(counts=counts, total=int(values.size))


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.int64)


def smooth_histogram(h: IntensityHistogram, window: int) -> IntensityHistogram:
    """Centered moving average, window shrinking at the ends, rounded to the
    nearest integer (halves up). The smoothed total generally differs from
    the pixel total; nothing downstream relies on it."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 1")
    if window == 1:
        return IntensityHistogram(counts=h.counts.copy(), total=h.total)
    half = window // 2
    n = h.counts.shape[0]
    cs = np.concatenate([[0], np.cumsum(h.counts, dtype=np.int64)])
    idx = np.arange(n)
    a = np.maximum(idx - half, 0)
    b = np.minimum(idx + half, n - 1)
    sums = cs[b + 1] - cs[a]
    smoothed = _round_half_up(sums / (b - a + 1))
    return IntensityHistogram(counts=smoothed, total=int(smoothed.sum()))


def _plateau_minima(counts: np.ndarray):
    """Yield (start, end, value) for maximal equal runs that are local minima
    (both true neighbors strictly larger). Runs touching either end of the
    array have a missing flank and do not qualify."""
    n = counts.shape[0]
    change = np.flatnonzero(np.diff(counts)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change - 1, [n - 1]])
    for a, b in zip(starts, ends):
        if a == 0 or b == n - 1:
            continue
        v = counts[a]
        if counts[a - 1] > v and counts[b + 1] > v:
            yield int(a), int(b), int(v)


def find_loft(h: IntensityHistogram, bounds: LoftBounds, window: int = 5) -> ThresholdResult:
    """Deepest local minimum of the window-smoothed histogram in (lo, hi)."""
    smoothed = smooth_histogram(h, window)
    lo, hi = bounds.lo, bounds.hi
    candidates: list[tuple[int, int]] = []
    for a, b, v in _plateau_minima(smoothed.counts):
        ca, cb = max(a, lo + 1), min(b, hi - 1)
        if ca > cb:
            continue
        candidates.append(((ca + cb) // 2, v))
    if not candidates:
        raise NoLoftError(bounds, h)
    candidates.sort()
    threshold = min(candidates, key=lambda c: (c[1], c[0]))[0]
    return ThresholdResult(threshold=threshold, candidates=candidates, smoothing_window=window)


def default_bounds(bit_depth_max: int) -> LoftBounds:
    """Empirical tissue bounds (300, 800 at 16 bits) scaled to the format."""
    if bit_depth_max < 255:
        raise ValueError("bit_depth_max must be >= 255")
    scale = bit_depth_max / 65535.0
    lo = max(int(np.floor(300.0 * scale + 0.5)), 1)
    hi = max(int(np.floor(800.0 * scale + 0.5)), lo + 2)
    return LoftBounds(lo=lo, hi=hi)


@dataclass(frozen=True)
class TissueSegmentation:
    mask: BinaryMask
    threshold: ThresholdResult
    histogram: IntensityHistogram
    preprocess: PreprocessResult
    bounds: LoftBounds


@dataclass(frozen=True)
class LesionSegmentation:
    report: LesionReport
    mask: BinaryMask
    threshold: ThresholdResult
    histogram: IntensityHistogram
    preprocess: PreprocessResult
    bounds: LoftBounds


def segment_tissue(
    image: GrayImage16,
    ghost: GhostRemovalParams | None = None,
    diffusion: DiffusionParams | None = None,
    bias: BiasParams | None = None,
    bounds: LoftBounds | None = None,
    window: int = 5,
    pre: PreprocessResult | None = None,
) -> TissueSegmentation:
    """Fibroglandular segmentation of a pre-contrast slice.

    Fibroglandular tissue is the low-intensity class: the mask holds body
    pixels with 0 < intensity <= threshold. Pass ``pre`` to reuse an already
    preprocessed result instead of running the pipeline again.
    """
    bounds = bounds or default_bounds(65535)
    if pre is None:
        pre = preprocess_pipeline(image, ghost=ghost, diffusion=diffusion, bias=bias)
    hist = histogram(pre.image, pre.body)
    result = find_loft(hist, bounds, window)
    px = pre.image.pixels
    mask = BinaryMask((px > 0) & (px <= result.threshold) & pre.body.bits)
    return TissueSegmentation(mask=mask, threshold=result, histogram=hist, preprocess=pre, bounds=bounds)


def label_components(mask: BinaryMask, min_area: int) -> tuple[list[LesionComponent], BinaryMask]:
    """4-connected components of at least min_area pixels, largest first
    (ties by topmost then leftmost pixel), plus the mask of the survivors."""
    labeled, n = ndimage.label(mask.bits, structure=FOUR_CONNECTED)
    raw = []
    kept = np.zeros(mask.bits.shape, dtype=bool)
    for idx in range(1, n + 1):
        ys, xs = np.nonzero(labeled == idx)
        if ys.size < min_area:
            continue
        kept[ys, xs] = True
        raw.append(
            (
                -int(ys.size),
                int(ys.min()),
                int(xs.min()),
                (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
                (float(xs.mean()), float(ys.mean())),
            )
        )
    raw.sort(key=lambda c: c[:3])
    components = [
        LesionComponent(label=i + 1, pixel_count=-neg, bbox=bbox, centroid=centroid)
        for i, (neg, _, _, bbox, centroid) in enumerate(raw)
    ]
    return components, BinaryMask(kept)


def segment_lesion(
    image: GrayImage16,
    ghost: GhostRemovalParams | None = None,
    diffusion: DiffusionParams | None = None,
    bias: BiasParams | None = None,
    window: int = 5,
    min_area: int = 10,
    bounds: LoftBounds | None = None,
    pre: PreprocessResult | None = None,
) -> LesionSegmentation:
    """Sequential lesion extraction from a post-contrast slice.

    No empirical bounds: the loft is searched in (1, max intensity present
    - 1), excluding the background bin 0. Lesions are the high-intensity
    side; components below min_area are dropped and the survivors are
    reported largest first. An empty report is a valid outcome.
    """
    if pre is None:
        pre = preprocess_pipeline(image, ghost=ghost, diffusion=diffusion, bias=bias)
    hist = histogram(pre.image, pre.body)
    if bounds is None:
        max_present = hist.max_intensity_present()
        if max_present < 3:
            raise NoLoftError(LoftBounds(1, 3), hist)
        bounds = LoftBounds(1, max_present - 1)
    result = find_loft(hist, bounds, window)
    raw = BinaryMask((pre.image.pixels > result.threshold) & pre.body.bits)
    components, mask = label_components(raw, min_area)
    report = LesionReport(threshold=result.threshold, components=components, min_area_applied=min_area)
    return LesionSegmentation(
        report=report, mask=mask, threshold=result, histogram=hist, preprocess=pre, bounds=bounds
    )


def downsample_histogram(h: IntensityHistogram, max_points: int = 2048) -> list[tuple[int, int, int]]:
    """(lo, hi, max count) buckets for plotting; bucket boundaries are fixed
    so the bucket containing any given intensity reports its exact maximum."""
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    width = -(-N_BINS // max_points)
    counts = h.counts
    buckets = []
    for lo in range(0, N_BINS, width):
        hi = min(lo + width - 1, N_BINS - 1)
        buckets.append((lo, hi, int(counts[lo : hi + 1].max())))
    return buckets
