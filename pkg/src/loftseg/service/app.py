"""HTTP layer over the segmentation core.

All computation goes through ``run.run_segmentation``, the same entry point
the CLI uses, so results are byte-identical between the two front ends.
Segmentation endpoints are plain ``def`` routes (they run in the thread
pool), which keeps ``/api/health`` responsive during long runs.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..image_io import PNG16, ImageFormatError, decode_image, encode_image
from ..loft import LesionSegmentation, NoLoftError, downsample_histogram
from ..run import RunParams, run_segmentation
from .schemas import (
    HealthResponse,
    SegmentRequest,
    SegmentResponse,
    UploadResponse,
)
from .store import ImageStore

MAX_UPLOAD_BYTES = 64 * 1024 * 1024
HISTOGRAM_POINTS = 2048


def _buckets(histogram) -> list[dict]:
    return [
        {"lo": lo, "hi": hi, "count": count}
        for lo, hi, count in downsample_histogram(histogram, HISTOGRAM_POINTS)
    ]


def create_app(store_capacity: int = 32, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="loftseg service", version=__version__)
    store = ImageStore(capacity=store_capacity)
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def bad_params(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/api/images", response_model=UploadResponse)
    async def upload_image(request: Request):
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="image exceeds 64 MiB")
        try:
            image = decode_image(body)
        except ImageFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        entry = store.put(image)
        return UploadResponse(id=entry.id, width=image.width, height=image.height)

    @app.post("/api/segment", response_model=SegmentResponse)
    def segment(req: SegmentRequest):
        entry = store.get(req.id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown image id {req.id}")
        overrides = req.params.model_dump(exclude_none=True)
        overrides["lambda"] = overrides.pop("lam", None)
        if overrides["lambda"] is None:
            del overrides["lambda"]
        overrides["mode"] = req.mode
        try:
            params = RunParams.from_dict(overrides)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        try:
            outcome = run_segmentation(entry.original, params)
        except NoLoftError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": str(exc), "histogram": _buckets(exc.histogram)},
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        result = outcome.result
        mask_png = encode_image(result.mask, PNG16)
        payload = {
            "threshold": result.threshold.threshold,
            "threshold_count": int(result.histogram.counts[result.threshold.threshold]),
            "candidates": [{"intensity": i, "count": c} for i, c in result.threshold.candidates],
            "histogram": _buckets(result.histogram),
            "bounds": {"lo": result.bounds.lo, "hi": result.bounds.hi},
            "mask_url": f"/api/results/{req.id}/mask.png",
            "mode": req.mode,
            "timing_ms": outcome.segment_ms,
            "smoothing_window": result.threshold.smoothing_window,
            "components": None,
        }
        if isinstance(result, LesionSegmentation):
            payload["components"] = [
                {
                    "label": c.label,
                    "pixel_count": c.pixel_count,
                    "bbox": list(c.bbox),
                    "centroid": list(c.centroid),
                }
                for c in result.report.components
            ]
        store.set_result(req.id, mask_png, payload)
        return payload

    @app.get("/api/results/{image_id}/mask.png")
    def mask_png(image_id: str):
        entry = store.get(image_id)
        if entry is None or entry.mask_png is None:
            raise HTTPException(status_code=404, detail="no segmentation result for this id")
        return Response(content=entry.mask_png, media_type="image/png")

    @app.get("/api/health", response_model=HealthResponse)
    async def health():
        return HealthResponse(status="ok", version=__version__)

    static = static_dir or _default_static_dir()
    if static and os.path.isdir(static):
        app.mount("/", StaticFiles(directory=static, html=True), name="console")
    return app


def _default_static_dir() -> str | None:
    # repo layout: frontend/dist next to src/; present only when the console
    # has been built, the API works without it
    here = os.path.dirname(os.path.abspath(__file__))
    candidate = os.path.normpath(os.path.join(here, "..", "..", "..", "frontend", "dist"))
    return candidate if os.path.isdir(candidate) else None
