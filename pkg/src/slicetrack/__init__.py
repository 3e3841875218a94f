"""Training-free cross-sectional segmentation by slice-to-slice tracking.

Seed keypoints on one slice (by hand or from wavelet detail magnitudes),
track them through neighboring slices with pyramidal Lucas-Kanade flow,
and take the convex hull of the surviving points as the per-slice mask.
"""

from .core import (
    GraySlice,
    Keypoint,
    KeypointSet,
    KeypointStatus,
    Roi,
    SliceMask,
    TrackParams,
    Volume,
    crop,
    normalize_intensities,
)
from .errors import (
    BoundsError,
    ConfigError,
    DegenerateHullError,
    IngestError,
    SeedError,
    SliceTrackError,
    ValidationError,
)
from .flow import Pyramid, TrackOutcome, build_pyramid, track_point, track_set
from .geometry import Polygon, convex_hull, dsc, rasterize
from .io import load_annotations, load_masks, load_volume, read_seed_file, save_result
from .pipeline import (
    MetricsReport,
    SeedSpec,
    SegmentationResult,
    SliceRecord,
    VoxelVolume,
    evaluate,
    propagate,
    reconstruct,
    seed_keypoints,
    segment,
)
from .wavelet import (
    DetectParams,
    MagnitudeMap,
    SubbandSet,
    detect_keypoints,
    haar_dwt2,
    inverse_haar_dwt2,
    magnitude,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsError",
    "ConfigError",
    "DegenerateHullError",
    "DetectParams",
    "GraySlice",
    "IngestError",
    "Keypoint",
    "KeypointSet",
    "KeypointStatus",
    "MagnitudeMap",
    "MetricsReport",
    "Polygon",
    "Pyramid",
    "Roi",
    "SeedError",
    "SeedSpec",
    "SegmentationResult",
    "SliceMask",
    "SliceRecord",
    "SliceTrackError",
    "SubbandSet",
    "TrackOutcome",
    "TrackParams",
    "ValidationError",
    "Volume",
    "VoxelVolume",
    "build_pyramid",
    "convex_hull",
    "crop",
    "detect_keypoints",
    "dsc",
    "evaluate",
    "haar_dwt2",
    "inverse_haar_dwt2",
    "load_annotations",
    "load_masks",
    "load_volume",
    "magnitude",
    "normalize_intensities",
    "propagate",
    "rasterize",
    "read_seed_file",
    "reconstruct",
    "save_result",
    "seed_keypoints",
    "segment",
    "track_point",
    "track_set",
]
