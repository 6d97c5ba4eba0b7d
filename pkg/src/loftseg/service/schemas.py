"""Request/response models for the HTTP API. Field names are snake_case,
intensities are integers, timings are integer milliseconds."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class UploadResponse(BaseModel):
    id: str
    width: int
    height: int


class ParamsOverride(BaseModel):
    """Optional overrides of the pipeline defaults."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    lo: Optional[int] = Field(None, ge=0, le=65535)
    hi: Optional[int] = Field(None, ge=0, le=65535)
    smooth_window: Optional[int] = Field(None, ge=1)
    iterations: Optional[int] = Field(None, ge=0)
    lam: Optional[float] = Field(None, alias="lambda", gt=0, le=0.25)
    k: Optional[float] = Field(None, gt=0)
    se_shape: Optional[Literal["disk", "square", "cross"]] = None
    se_radius: Optional[int] = Field(None, ge=1)
    binarize_threshold: Optional[int] = Field(None, gt=0, lt=65535)
    gain_sigma: Optional[float] = Field(None, gt=0)
    final_sigma: Optional[float] = Field(None, ge=0)
    epsilon: Optional[float] = Field(None, gt=0)
    min_area: Optional[int] = Field(None, ge=0)
    pre_done: Optional[bool] = None


class SegmentRequest(BaseModel):
    id: str
    mode: Literal["tissue", "lesion"]
    params: ParamsOverride = Field(default_factory=ParamsOverride)


class Candidate(BaseModel):
    intensity: int
    count: int


class HistogramBucket(BaseModel):
    lo: int
    hi: int
    count: int


class Component(BaseModel):
    label: int
    pixel_count: int
    bbox: list[int]  # x0, y0, x1, y1 inclusive
    centroid: list[float]  # x, y


class Bounds(BaseModel):
    lo: int
    hi: int


class SegmentResponse(BaseModel):
    threshold: int
    threshold_count: int
    candidates: list[Candidate]
    histogram: list[HistogramBucket]
    bounds: Bounds
    mask_url: str
    mode: str
    timing_ms: int
    smoothing_window: int
    components: Optional[list[Component]] = None


class HealthResponse(BaseModel):
    status: str
    version: str
