"""Reliability-weighted multi-scale spatio-temporal maps for remote pulse measurement."""
from .containers import MAP_CHANNELS, N_SUBSETS, ROI_NAMES, LandmarkTrack, SpatioTemporalMap, Video
from .errors import ConvergenceError, DegenerateError, FormatError, RppgError

__version__ = "0.1.0"

__all__ = [
    "MAP_CHANNELS",
    "N_SUBSETS",
    "ROI_NAMES",
    "LandmarkTrack",
    "SpatioTemporalMap",
    "Video",
    "RppgError",
    "FormatError",
    "DegenerateError",
    "ConvergenceError",
]
