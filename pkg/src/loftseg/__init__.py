"""loftseg: histogram-valley (spectrum loft) segmentation for 16-bit
breast-MR style images, with the full preprocessing chain, evaluation
metrics, phantom generation, a CLI and an HTTP service."""

__version__ = "0.1.0"

from .image_io import ImageFormatError, read_image, read_mask, write_image
from .loft import (
    IntensityHistogram,
    LesionReport,
    LoftBounds,
    NoLoftError,
    ThresholdResult,
    default_bounds,
    find_loft,
    histogram,
    segment_lesion,
    segment_tissue,
    smooth_histogram,
)
from .metrics import MetricsReport, OverlapCounts, compare, dsc, ji, overlap
from .morphology import StructuringElement, binarize, dilate, erode
from .phantoms import LesionBlob, PhantomSpec, generate
from .preprocess import (
    BiasParams,
    DiffusionParams,
    GhostRemovalParams,
    compute_k,
    correct_bias,
    diffuse,
    preprocess_pipeline,
    remove_ghost_artifacts,
    speckle_index,
)
from .rasters import BinaryMask, FloatImage, GrayImage16, ImageStats, image_stats
from .run import RunParams, run_segmentation

__all__ = [
    "__version__",
    "BinaryMask",
    "BiasParams",
    "DiffusionParams",
    "GhostRemovalParams",
    "FloatImage",
    "GrayImage16",
    "ImageFormatError",
    "ImageStats",
    "IntensityHistogram",
    "LesionBlob",
    "LesionReport",
    "LoftBounds",
    "MetricsReport",
    "NoLoftError",
    "OverlapCounts",
    "PhantomSpec",
    "RunParams",
    "StructuringElement",
    "ThresholdResult",
    "binarize",
    "compare",
    "compute_k",
    "correct_bias",
    "default_bounds",
    "diffuse",
    "dilate",
    "dsc",
    "erode",
    "find_loft",
    "generate",
    "histogram",
    "image_stats",
    "ji",
    "overlap",
    "preprocess_pipeline",
    "read_image",
    "read_mask",
    "remove_ghost_artifacts",
    "run_segmentation",
    "segment_lesion",
    "segment_tissue",
    "smooth_histogram",
    "speckle_index",
    "write_image",
]
