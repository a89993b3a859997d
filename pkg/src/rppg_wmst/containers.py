"""In-memory containers passed between pipeline stages."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

ROI_NAMES = (
    "forehead",
    "mouth",
    "left_cheek_1",
    "left_cheek_2",
    "right_cheek_1",
    "right_cheek_2",
)
N_ROIS = len(ROI_NAMES)
N_SUBSETS = 2**N_ROIS - 1
MAP_CHANNELS = ("R", "G", "B", "Y", "U", "V")


@dataclass
class Video:
    """Frame stack of shape (T, H, W, 3) with RGB samples in [0, 1]."""

    frames: np.ndarray
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise FormatError(f"expected (T, H, W, 3) frames, got {self.frames.shape}")
        if not self.fps > 0:
            raise FormatError(f"fps must be positive, got {self.fps}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass
class LandmarkTrack:
    """Per-frame ROI polygons.

    ``frames[t][name]`` is an ``(N, 2)`` array of ``(x, y)`` pixel vertices.
    """

    frames: list[dict[str, np.ndarray]] = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    def polygons(self, t: int) -> list[np.ndarray]:
        return [self.frames[t][name] for name in ROI_NAMES]


@dataclass
class SpatioTemporalMap:
    """Map of shape (63, T, 6); row ``i`` belongs to ROI subset ``i + 1``."""

    data: np.ndarray
    fps: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[0] != N_SUBSETS or self.data.shape[2] != len(MAP_CHANNELS):
            raise FormatError(f"expected (63, T, 6) map, got {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    def row(self, subset: int, channel: str = "G") -> np.ndarray:
        """Time series of one subset row (``subset`` in 1..63) and channel."""
        return self.data[subset - 1, :, MAP_CHANNELS.index(channel)]
