"""ROI masks and the 63 non-empty ROI subsets that index map rows.

Subset ``s`` (1..63) includes ROI ``i`` iff bit ``i`` of ``s`` is set, with
bit 0 = forehead, following ``ROI_NAMES`` order. Row ``s - 1`` of every map
belongs to subset ``s``.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .containers import N_ROIS, N_SUBSETS, ROI_NAMES, LandmarkTrack
from .errors import DegenerateError


def enumerate_subsets() -> list[int]:
    return list(range(1, N_SUBSETS + 1))


def subset_members(subset: int) -> tuple[str, ...]:
    return tuple(name for i, name in enumerate(ROI_NAMES) if subset >> i & 1)


def subset_atom_matrix() -> np.ndarray:
    """(63, 64) indicator: atom code ``a`` lies in the union of subset ``s``."""
    s = np.arange(1, N_SUBSETS + 1)[:, None]
    a = np.arange(_kernels.N_ATOMS)[None, :]
    return ((s & a) != 0).astype(np.float64)


def rasterize_roi_masks(polygons, height: int, width: int) -> np.ndarray:
    """Six ``(H, W)`` boolean masks, one per polygon, by pixel-center even-odd fill."""
    codes = _kernels.fill_codes([list(polygons)], height, width)[0]
    masks = np.stack([(codes >> i) & 1 for i in range(len(polygons))]).astype(bool)
    for i, m in enumerate(masks):
        if not m.any():
            name = ROI_NAMES[i] if len(polygons) == N_ROIS else str(i)
            raise DegenerateError(f"ROI {name!r} rasterizes to zero pixels")
    return masks


def union_mask(subset: int, masks: np.ndarray) -> np.ndarray:
    if not 1 <= subset <= 2 ** len(masks) - 1:
        raise ValueError(f"subset index {subset} out of range")
    out = np.zeros(masks.shape[1:], dtype=bool)
    for i in range(len(masks)):
        if subset >> i & 1:
            out |= masks[i]
    return out


def track_codes(track: LandmarkTrack, height: int, width: int) -> np.ndarray:
    """Per-frame ROI membership codes of shape (T, H, W), uint8.

    Raises DegenerateError if any ROI is empty in any frame.
    """
    codes = _kernels.fill_codes([track.polygons(t) for t in range(len(track))], height, width)
    for i, name in enumerate(ROI_NAMES):
        present = ((codes >> i) & 1).reshape(len(codes), -1).any(axis=1)
        if not present.all():
            t = int(np.argmin(present))
            raise DegenerateError(f"ROI {name!r} rasterizes to zero pixels in frame {t}")
    return codes
