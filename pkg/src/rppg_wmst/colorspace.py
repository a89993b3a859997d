"""Color conversions on arrays whose last axis is RGB in [0, 1].

YUV uses the BT.601 analog constants (full range); hue is in degrees and
is pinned to 0 wherever saturation is 0.
"""
import numpy as np

from .errors import FormatError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
U_SCALE = 0.492
V_SCALE = 0.877


def _check(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise FormatError(f"last axis must hold RGB, got shape {rgb.shape}")
    if not np.all(np.isfinite(rgb)):
        raise FormatError("non-finite color sample")
    return rgb


def luminance(rgb):
    rgb = _check(rgb)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def rgb_to_yuv(rgb):
    """Stack RGB with YUV: returns ``(..., 6)`` ordered R, G, B, Y, U, V."""
    rgb = _check(rgb)
    y = luminance(rgb)
    u = U_SCALE * (rgb[..., 2] - y)
    v = V_SCALE * (rgb[..., 0] - y)
    return np.concatenate([rgb, y[..., None], u[..., None], v[..., None]], axis=-1)


def rgb_to_hsv(rgb):
    """Hexcone HSV; returns ``(..., 3)`` with hue in [0, 360)."""
    rgb = _check(rgb)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    safe_c = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        np.mod((g - b) / safe_c, 6.0),
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, 60.0 * h, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv):
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    sector = np.floor(hp).astype(int) % 6
    zeros = np.zeros_like(c)
    table = [
        (c, x, zeros),
        (x, c, zeros),
        (zeros, c, x),
        (zeros, x, c),
        (x, zeros, c),
        (c, zeros, x),
    ]
    out = np.zeros(hsv.shape[:-1] + (3,))
    for k, (r1, g1, b1) in enumerate(table):
        sel = sector == k
        out[..., 0] = np.where(sel, r1, out[..., 0])
        out[..., 1] = np.where(sel, g1, out[..., 1])
        out[..., 2] = np.where(sel, b1, out[..., 2])
    return out + (v - c)[..., None]
