"""Per-pixel reliability weights and the weighted / uniform spatio-temporal maps.

Each frame gets four reliability cues in (0, 1]:

* skin: ``exp(-(z - mu)^T Sigma^-1 (z - mu))`` on the (U, V) chroma ``z``
  with mean and covariance fitted over the six-ROI union of that frame;
* edge: ``exp(-sqrt(HL^2 + LH^2 + HH^2))`` of the level-1 Haar SWT of luma;
* reflection: ``exp(-max(0, (1 - S) * V - tau_r))`` from HSV;
* shadow: ``exp(-max(0, (1 - Y) - tau_s))``.

They are fused with coefficients proportional to each cue's variance over
the ROI union, and every map row is the weighted mean over the union of the
row's ROIs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .colorspace import rgb_to_hsv, rgb_to_yuv
from .containers import MAP_CHANNELS, N_SUBSETS, LandmarkTrack, SpatioTemporalMap, Video
from .errors import DegenerateError, FormatError
from .roi import subset_atom_matrix, track_codes
from .wavelet import swt2d

CHROMA_EPS = 1e-6
VARIANCE_FLOOR = 1e-12
MIN_DOMAIN_PIXELS = 8
COMPONENTS = ("skin", "edge", "reflection", "shadow")

_CHUNK = 128


@dataclass(frozen=True)
class Thresholds:
    reflection: float = 0.3
    shadow: float = 0.7

    def __post_init__(self):
        for name in ("reflection", "shadow"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} threshold must lie in [0, 1], got {v}")


@dataclass
class ChromaModel:
    mean: np.ndarray
    cov: np.ndarray
    eps: float = CHROMA_EPS


@dataclass
class WeightField:
    skin: np.ndarray
    edge: np.ndarray
    reflection: np.ndarray
    shadow: np.ndarray
    fused: np.ndarray
    alphas: np.ndarray

    def components(self) -> np.ndarray:
        return np.stack([self.skin, self.edge, self.reflection, self.shadow])


# ------------------------------------------------------------- batched core
# All helpers below take a leading frame axis: planes are (T, H, W).


def _fit_chroma_batch(uv, domain, eps):
    counts = domain.reshape(len(domain), -1).sum(axis=1)
    if np.any(counts < MIN_DOMAIN_PIXELS):
        t = int(np.argmin(counts))
        raise DegenerateError(f"frame {t}: chroma domain has {counts[t]} pixels, need {MIN_DOMAIN_PIXELS}")
    m = domain[..., None].astype(np.float64)
    mean = (uv * m).sum(axis=(1, 2)) / counts[:, None]
    d = (uv - mean[:, None, None, :]) * m
    cov = np.einsum("thwi,thwj->tij", d, d) / counts[:, None, None]
    cov = cov + eps * np.eye(2)
    return mean, cov


def _skin_batch(uv, mean, cov):
    prec = np.linalg.inv(cov)
    d = uv - mean[:, None, None, :]
    dist = np.einsum("thwi,tij,thwj->thw", d, prec, d)
    return np.exp(-np.maximum(dist, 0.0))


def _edge_batch(luma):
    bands = swt2d(luma)
    return np.exp(-np.sqrt(bands.HL**2 + bands.LH**2 + bands.HH**2))


def _reflection(hsv, tau_r):
    s_spec = (1.0 - hsv[..., 1]) * hsv[..., 2]
    return np.exp(-np.maximum(0.0, s_spec - tau_r))


def _shadow(luma, tau_s):
    return np.exp(-np.maximum(0.0, (1.0 - luma) - tau_s))


def _fusion_coefficients(components, domain):
    """components: (T, 4, H, W); returns alphas of shape (T, 4)."""
    m = domain[:, None].astype(np.float64)
    n = domain.reshape(len(domain), -1).sum(axis=1)[:, None]
    mean = (components * m).sum(axis=(2, 3)) / n
    var = (((components - mean[..., None, None]) ** 2) * m).sum(axis=(2, 3)) / n
    total = var.sum(axis=1, keepdims=True)
    flat = np.all(var < VARIANCE_FLOOR, axis=1, keepdims=True)
    safe = np.where(flat, 1.0, total)
    return np.where(flat, 0.25, var / safe)


def _weights_batch(frames6, hsv, domain, thresholds):
    uv = frames6[..., 4:6]
    mean, cov = _fit_chroma_batch(uv, domain, CHROMA_EPS)
    luma = frames6[..., 3]
    comps = np.stack(
        [
            _skin_batch(uv, mean, cov),
            _edge_batch(luma),
            _reflection(hsv, thresholds.reflection),
            _shadow(luma, thresholds.shadow),
        ],
        axis=1,
    )
    alphas = _fusion_coefficients(comps, domain)
    fused = np.einsum("tk,tkhw->thw", alphas, comps)
    return comps, alphas, fused, mean, cov


# ------------------------------------------------------------ per-frame API


def fit_chroma_model(frame6, domain_mask, eps=CHROMA_EPS) -> ChromaModel:
    """Mean and population covariance of (U, V) over ``domain_mask``, plus ``eps * I``."""
    frame6 = np.asarray(frame6, dtype=np.float64)
    mean, cov = _fit_chroma_batch(frame6[None, ..., 4:6], np.asarray(domain_mask, bool)[None], eps)
    return ChromaModel(mean[0], cov[0], eps)


def skin_weight(frame6, model: ChromaModel):
    uv = np.asarray(frame6, dtype=np.float64)[None, ..., 4:6]
    return _skin_batch(uv, model.mean[None], model.cov[None])[0]


def edge_weight(luma):
    return _edge_batch(np.asarray(luma, dtype=np.float64))


def reflection_weight(hsv, tau_r=0.3):
    return _reflection(np.asarray(hsv, dtype=np.float64), tau_r)


def shadow_weight(luma, tau_s=0.7):
    return _shadow(np.asarray(luma, dtype=np.float64), tau_s)


def fusion_coefficients(components, domain_mask):
    """Variance-proportional coefficients for a (4, H, W) component stack."""
    return _fusion_coefficients(np.asarray(components, float)[None], np.asarray(domain_mask, bool)[None])[0]


def aggregate_weights(components, domain_mask):
    comps = np.asarray(components, dtype=np.float64)
    alphas = fusion_coefficients(comps, domain_mask)
    return np.tensordot(alphas, comps, axes=1)


def weight_field(frame_rgb, domain_mask, thresholds=Thresholds()) -> WeightField:
    """All four cues and the fused weight for one RGB frame."""
    rgb = np.asarray(frame_rgb, dtype=np.float64)[None]
    comps, alphas, fused, _, _ = _weights_batch(rgb_to_yuv(rgb), rgb_to_hsv(rgb), np.asarray(domain_mask, bool)[None], thresholds)
    return WeightField(*comps[0], fused=fused[0], alphas=alphas[0])


def weighted_pool(frame6, weight_plane, mask):
    """Normalized weighted mean of each channel over ``mask``."""
    frame6 = np.asarray(frame6, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    w = np.asarray(weight_plane, dtype=np.float64)[mask]
    if w.size == 0:
        raise DegenerateError("empty pooling mask")
    if not np.all(w > 0):
        raise DegenerateError("pooling weights must be positive")
    w = w / w.max()
    vals = frame6[mask]
    return (w[:, None] * vals).sum(axis=0) / w.sum()


# --------------------------------------------------------------- video maps


def _pool_rows(frames6, weights, codes, use_numba=None):
    atom_w, atom_wv = _kernels.pool_atoms(codes, weights, frames6, use_numba=use_numba)
    m = subset_atom_matrix()
    num = np.einsum("sa,tac->stc", m, atom_wv)
    den = np.einsum("sa,ta->st", m, atom_w)
    return num / den[..., None]


def _check_inputs(video: Video, track: LandmarkTrack):
    if len(track) != video.n_frames:
        raise FormatError(f"{len(track)} landmark frames for a {video.n_frames}-frame video")


def video_weights(video: Video, track: LandmarkTrack, thresholds=Thresholds(), codes=None):
    """Fused weights (T, H, W), normalized to max 1 over each frame's ROI union,
    and the ROI codes used to compute them."""
    _check_inputs(video, track)
    if codes is None:
        codes = track_codes(track, video.height, video.width)
    out = np.empty(codes.shape)
    for lo in range(0, video.n_frames, _CHUNK):
        rgb = video.frames[lo:lo + _CHUNK]
        domain = codes[lo:lo + _CHUNK] != 0
        _, _, fused, _, _ = _weights_batch(rgb_to_yuv(rgb), rgb_to_hsv(rgb), domain, thresholds)
        peak = np.where(domain, fused, 0.0).max(axis=(1, 2))
        out[lo:lo + _CHUNK] = fused / peak[:, None, None]
    return out, codes


def build_wmst_map(video: Video, track: LandmarkTrack, thresholds=Thresholds(), use_numba=None) -> SpatioTemporalMap:
    return build_wmst_map_with_weights(video, track, thresholds, use_numba)[0]


def build_wmst_map_with_weights(video: Video, track: LandmarkTrack, thresholds=Thresholds(), use_numba=None):
    """``(map, weights (T, H, W), codes (T, H, W))``; the weights are those of ``video_weights``."""
    weights, codes = video_weights(video, track, thresholds)
    data = np.empty((N_SUBSETS, video.n_frames, len(MAP_CHANNELS)))
    for lo in range(0, video.n_frames, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        data[:, sl] = _pool_rows(rgb_to_yuv(video.frames[sl]), weights[sl], codes[sl], use_numba)
    return SpatioTemporalMap(data, video.fps), weights, codes


def build_mst_map(video: Video, track: LandmarkTrack, use_numba=None) -> SpatioTemporalMap:
    _check_inputs(video, track)
    codes = track_codes(track, video.height, video.width)
    data = np.empty((N_SUBSETS, video.n_frames, len(MAP_CHANNELS)))
    for lo in range(0, video.n_frames, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        data[:, sl] = _pool_rows(rgb_to_yuv(video.frames[sl]), np.ones(codes[sl].shape), codes[sl], use_numba)
    return SpatioTemporalMap(data, video.fps)
