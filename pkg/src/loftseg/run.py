"""Shared run configuration and the single entry point both the CLI and the
HTTP service call, which is what makes their outputs byte-identical for
identical inputs and parameters."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

from .loft import (
    LesionSegmentation,
    LoftBounds,
    TissueSegmentation,
    default_bounds,
    segment_lesion,
    segment_tissue,
)
from .morphology import SHAPES, StructuringElement
from .preprocess import BiasParams, DiffusionParams, GhostRemovalParams, PreprocessResult
from .rasters import BinaryMask, GrayImage16

MODES = ("tissue", "lesion")

# JSON keys use "lambda"; the dataclass field cannot.
_JSON_KEYS = {
    "lam": "lambda",
}


@dataclass(frozen=True)
class RunParams:
    """Every knob of a segmentation run, with the pipeline defaults."""

    mode: str = "tissue"
    lo: int | None = None  # None: empirical defaults (tissue) or data rule (lesion)
    hi: int | None = None
    smooth_window: int = 5
    iterations: int = 15
    lam: float = 0.25
    k: float | None = None  # None: derived from the ghost-removed image
    se_shape: str = "disk"
    se_radius: int = 3
    binarize_threshold: int = 100
    gain_sigma: float | None = None  # None: width / 8
    final_sigma: float = 1.0
    epsilon: float = 1e-3
    min_area: int = 10
    pre_done: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.se_shape not in SHAPES:
            raise ValueError(f"se_shape must be one of {SHAPES}")
        if (self.lo is None) != (self.hi is None):
            raise ValueError("lo and hi must be given together")
        if self.lo is not None and not 0 <= self.lo < self.hi <= 65535:
            raise ValueError("bounds must satisfy 0 <= lo < hi <= 65535")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be an odd integer >= 1")
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")

    def ghost_params(self) -> GhostRemovalParams:
        return GhostRemovalParams(
            binarize_threshold=self.binarize_threshold,
            se=StructuringElement(self.se_shape, self.se_radius),
        )

    def diffusion_params(self) -> DiffusionParams:
        return DiffusionParams(k=self.k, lam=self.lam, iterations=self.iterations)

    def bias_params(self) -> BiasParams:
        return BiasParams(gain_sigma=self.gain_sigma, final_sigma=self.final_sigma, epsilon=self.epsilon)

    def bounds(self) -> LoftBounds | None:
        if self.lo is None:
            return default_bounds(65535) if self.mode == "tissue" else None
        return LoftBounds(self.lo, self.hi)

    def to_dict(self) -> dict:
        out = {}
        for name, value in self.__dict__.items():
            out[_JSON_KEYS.get(name, name)] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunParams":
        reverse = {v: k for k, v in _JSON_KEYS.items()}
        kwargs = {}
        for key, value in data.items():
            name = reverse.get(key, key)
            if name in cls.__dataclass_fields__:
                kwargs[name] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class RunOutcome:
    result: TissueSegmentation | LesionSegmentation
    params: RunParams  # effective values: auto knobs resolved
    segment_ms: int


def _pre_done_result(image: GrayImage16) -> PreprocessResult:
    # Image was preprocessed elsewhere: the body is exactly the nonzero area.
    return PreprocessResult(
        image=image,
        body=BinaryMask(image.pixels > 0),
        k=None,
        speckle_before=None,
        speckle_after=None,
    )


def run_segmentation(image: GrayImage16, params: RunParams) -> RunOutcome:
    """Run one tissue or lesion segmentation and report effective parameters."""
    t0 = time.perf_counter()
    pre = _pre_done_result(image) if params.pre_done else None
    common = dict(
        ghost=params.ghost_params(),
        diffusion=params.diffusion_params(),
        bias=params.bias_params(),
        bounds=params.bounds(),
        window=params.smooth_window,
        pre=pre,
    )
    if params.mode == "tissue":
        result = segment_tissue(image, **common)
    else:
        result = segment_lesion(image, min_area=params.min_area, **common)
    segment_ms = int(round((time.perf_counter() - t0) * 1000))

    effective = replace(
        params,
        lo=result.bounds.lo,
        hi=result.bounds.hi,
        k=result.preprocess.k if result.preprocess.k is not None else params.k,
        gain_sigma=params.gain_sigma if params.gain_sigma is not None else image.width / 8,
    )
    return RunOutcome(result=result, params=effective, segment_ms=segment_ms)
