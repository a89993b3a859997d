"""HHH wavelet map: RMS-pooled high-high-high subband of the 6-channel video."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .colorspace import rgb_to_yuv
from .containers import MAP_CHANNELS, N_SUBSETS, LandmarkTrack, SpatioTemporalMap, Video
from .errors import DegenerateError, FormatError
from .roi import subset_atom_matrix, track_codes
from .wavelet import INV_SQRT2, detail_along

_CHUNK = 128


def _spatial_detail(frames6):
    # (t, H, W, 6): high-pass along y then x
    return detail_along(detail_along(frames6, 1), 2)


def hhh_volume(video: Video) -> np.ndarray:
    """Full (T, H, W, 6) HHH subband; memory-hungry, meant for inspection and tests."""
    if video.n_frames < 2:
        raise DegenerateError("HHH needs at least 2 frames")
    s = _spatial_detail(rgb_to_yuv(video.frames))
    return (s - np.roll(s, -1, axis=0)) * INV_SQRT2


def build_hhh_map(video: Video, track: LandmarkTrack, use_numba=None) -> SpatioTemporalMap:
    """Per subset and frame: ``sqrt(mean over union pixels of HHH^2)``, per channel."""
    if len(track) != video.n_frames:
        raise FormatError(f"{len(track)} landmark frames for a {video.n_frames}-frame video")
    n = video.n_frames
    if n < 2:
        raise DegenerateError("HHH needs at least 2 frames")
    codes = track_codes(track, video.height, video.width)
    m = subset_atom_matrix()
    data = np.empty((N_SUBSETS, n, len(MAP_CHANNELS)))
    first = _spatial_detail(rgb_to_yuv(video.frames[:1]))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        s = _spatial_detail(rgb_to_yuv(video.frames[lo:hi + 1]))
        if hi == n:
            s = np.concatenate([s, first], axis=0)
        hhh = (s[:-1] - s[1:]) * INV_SQRT2
        atom_n, atom_sq = _kernels.pool_atoms(codes[lo:hi], np.ones(codes[lo:hi].shape), hhh**2, use_numba=use_numba)
        num = np.einsum("sa,tac->stc", m, atom_sq)
        den = np.einsum("sa,ta->st", m, atom_n)
        data[:, lo:hi] = np.sqrt(num / den[..., None])
    return SpatioTemporalMap(data, video.fps)
