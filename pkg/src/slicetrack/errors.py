"""Exception taxonomy shared across the package."""


class SliceTrackError(Exception):
    """Base class for all slicetrack errors."""


class ValidationError(SliceTrackError):
    """Inputs are malformed: bad value ranges, mismatched dimensions."""


class BoundsError(ValidationError):
    """A rectangle or point lies outside the image it refers to."""


class ConfigError(SliceTrackError):
    """Parameter combination cannot work (e.g. pyramid too deep for the image)."""


class DegenerateHullError(SliceTrackError):
    """Convex hull input has fewer than 3 distinct points or is collinear."""


class SeedError(SliceTrackError):
    """Keypoint seeding produced too few usable points."""


class IngestError(SliceTrackError):
    """Loading volumes or annotations from disk failed."""
