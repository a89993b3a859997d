"""Level-1 stationary Haar wavelet transforms with periodic boundaries.

Filters are orthonormal: ``approx[n] = (x[n] + x[n+1]) / sqrt(2)`` and
``detail[n] = (x[n] - x[n+1]) / sqrt(2)``, indices taken modulo the length.

2-D subband naming: the first letter is the filter along x (columns, last
axis), the second along y. So ``HL`` is the horizontal detail (high-pass
along x, low-pass along y) and ``LH`` the vertical detail.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError

INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _check_len(x, axis):
    if x.shape[axis] < 2:
        raise DegenerateError(f"axis {axis} has length {x.shape[axis]}, need at least 2")


def approx_along(x, axis):
    _check_len(x, axis)
    return (x + np.roll(x, -1, axis=axis)) * INV_SQRT2


def detail_along(x, axis):
    _check_len(x, axis)
    return (x - np.roll(x, -1, axis=axis)) * INV_SQRT2


def haar_swt1d(signal):
    """Return ``(approx, detail)`` of a 1-D signal."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("haar_swt1d expects a 1-D signal")
    return approx_along(x, 0), detail_along(x, 0)


@dataclass
class SwtSubbands2D:
    LL: np.ndarray
    LH: np.ndarray
    HL: np.ndarray
    HH: np.ndarray


def swt2d(plane) -> SwtSubbands2D:
    """Undecimated 2-D transform over the last two axes ``(..., H, W)``."""
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim < 2:
        raise ValueError("swt2d expects at least 2 dimensions")
    lo_x = approx_along(p, -1)
    hi_x = detail_along(p, -1)
    return SwtSubbands2D(
        LL=approx_along(lo_x, -2),
        LH=detail_along(lo_x, -2),
        HL=approx_along(hi_x, -2),
        HH=detail_along(hi_x, -2),
    )


def swt3d_hhh(volume, axes=(0, 1, 2)):
    """High-pass along all three ``axes``; other axes (e.g. channels) pass through."""
    v = np.asarray(volume, dtype=np.float64)
    for ax in axes:
        v = detail_along(v, ax)
    return v
