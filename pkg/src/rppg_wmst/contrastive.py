"""Contrastive and pretraining losses on normalized PSDs, with analytic gradients.

Also holds the map-space augmentations used to build positive and negative
samples. Nothing here trains a model; every loss returns its value and the
gradient with respect to each PSD it consumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .containers import MAP_CHANNELS, N_SUBSETS, SpatioTemporalMap
from .errors import DegenerateError, FormatError
from .spectral import Psd, default_nfft, normalize_psd, trace_psd

CLAMP = 1.0 - 1e-6
H_MAX = 2.0 * math.atanh(CLAMP)
PRETRAIN_LAMBDA = 0.05
RESIZE_RANGE = (0.5, 2.0)


@dataclass
class LossReport:
    loss: float
    gradients: dict = field(default_factory=dict)


def _vec(p, grid=None):
    if isinstance(p, Psd):
        if grid is not None and isinstance(grid, Psd):
            if p.freqs.shape != grid.freqs.shape or not np.array_equal(p.freqs, grid.freqs):
                raise FormatError("PSDs are on different frequency grids")
        p = p.power
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise FormatError(f"expected a 1-D PSD with at least 2 bins, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise FormatError("non-finite PSD values")
    return v


def _pearson_parts(a, b):
    ac, bc = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(ac @ ac), np.sqrt(bc @ bc)
    if na == 0 or nb == 0:
        raise DegenerateError("zero-variance PSD in Pearson similarity")
    r = float(ac @ bc / (na * nb))
    r = min(1.0, max(-1.0, r))
    grad_a = bc / (na * nb) - r * ac / (na * na)
    grad_b = ac / (na * nb) - r * bc / (nb * nb)
    return r, grad_a, grad_b


def pearson_similarity(psd_a, psd_b) -> float:
    """Centered cosine similarity of two PSDs on the same grid."""
    a = _vec(psd_a)
    b = _vec(psd_b, psd_a)
    if a.shape != b.shape:
        raise FormatError(f"PSD lengths differ: {a.size} vs {b.size}")
    return _pearson_parts(a, b)[0]


def pearson_gradients(psd_a, psd_b):
    """``(r, dr/da, dr/db)``."""
    a, b = _vec(psd_a), _vec(psd_b, psd_a)
    if a.shape != b.shape:
        raise FormatError(f"PSD lengths differ: {a.size} vs {b.size}")
    return _pearson_parts(a, b)


def arctanh_similarity(r) -> float:
    """``2 atanh(r)`` with ``r`` clamped to ``[-1 + 1e-6, 1 - 1e-6]``."""
    return 2.0 * math.atanh(min(CLAMP, max(-CLAMP, float(r))))


def _arctanh_slope(r):
    # zero outside the clamp: the clamped function is flat there
    if abs(r) >= CLAMP:
        return 0.0
    return 2.0 / (1.0 - r * r)


def _logsumexp(h):
    m = h.max()
    e = np.exp(h - m)
    s = e.sum()
    return m + math.log(s), e / s


def info_nce(anchor_psd, positive_psds, negative_psds, include_positive=False) -> LossReport:
    """Temperature-free InfoNCE over arctanh-mapped Pearson similarities.

    Per positive ``i``: ``l_i = -h(y, y+_i) + log sum_k exp h(y, y-_k)``; the
    loss is the mean over positives. With ``include_positive=True`` the
    positive's own term joins its denominator, as in the usual InfoNCE.

    Gradients are keyed ``anchor`` (F,), ``positives`` (P, F) and
    ``negatives`` (K, F).
    """
    a = _vec(anchor_psd)
    pos = [_vec(p, anchor_psd) for p in positive_psds]
    neg = [_vec(p, anchor_psd) for p in negative_psds]
    if not pos:
        raise DegenerateError("info_nce needs at least one positive")
    if not neg:
        raise DegenerateError("info_nce needs at least one negative")
    if any(v.shape != a.shape for v in pos + neg):
        raise FormatError("all PSDs must have the same number of bins")

    def sims(vs):
        out = [_pearson_parts(a, v) for v in vs]
        r = np.array([o[0] for o in out])
        h = np.array([arctanh_similarity(x) for x in r])
        slope = np.array([_arctanh_slope(x) for x in r])
        return h, slope, np.array([o[1] for o in out]), np.array([o[2] for o in out])

    hp, sp, dpa, dpv = sims(pos)
    hn, sn, dna, dnv = sims(neg)
    n_pos = len(pos)

    if not include_positive:
        lse, soft = _logsumexp(hn)
        loss = float(np.mean(lse - hp))
        g_hp = np.full(n_pos, -1.0 / n_pos)
        g_hn = soft
    else:
        g_hp = np.empty(n_pos)
        g_hn = np.zeros(len(neg))
        total = 0.0
        for i in range(n_pos):
            lse, soft = _logsumexp(np.concatenate([[hp[i]], hn]))
            total += lse - hp[i]
            g_hp[i] = (soft[0] - 1.0) / n_pos
            g_hn += soft[1:] / n_pos
        loss = total / n_pos

    g_rp = g_hp * sp
    g_rn = g_hn * sn
    grad_anchor = g_rp @ dpa + g_rn @ dna
    return LossReport(
        float(loss),
        {
            "anchor": grad_anchor,
            "positives": g_rp[:, None] * dpv,
            "negatives": g_rn[:, None] * dnv,
        },
    )


def pretrain_loss(pred_psd, target_psd, lam=PRETRAIN_LAMBDA) -> LossReport:
    """``||p - q||_1 + lam (1 - r(p, q))``; the L1 subgradient is 0 at ties."""
    p = _vec(pred_psd)
    q = _vec(target_psd, pred_psd)
    if p.shape != q.shape:
        raise FormatError(f"grid mismatch: {p.size} vs {q.size} bins")
    r, dr_p, dr_q = _pearson_parts(p, q)
    sgn = np.sign(p - q)
    loss = float(np.abs(p - q).sum() + lam * (1.0 - r))
    return LossReport(loss, {"pred": sgn - lam * dr_p, "target": -sgn - lam * dr_q})


# ------------------------------------------------------------ augmentations


def temporal_resize(smap: SpatioTemporalMap, factor) -> SpatioTemporalMap:
    """Linear resampling along time to ``round(T * factor)`` samples.

    Sample ``j`` of the output sits at input position ``j / factor`` (clamped
    at the last sample) and the frame rate is scaled by ``factor``, so the
    physical time axis is preserved.
    """
    lo, hi = RESIZE_RANGE
    if not lo <= factor <= hi:
        raise ValueError(f"resize factor {factor} outside [{lo}, {hi}]")
    n = smap.n_frames
    m = int(round(n * factor))
    if m < 4:
        raise DegenerateError(f"resized map would have {m} frames")
    if m == n and factor == 1.0:
        return SpatioTemporalMap(smap.data.copy(), smap.fps)
    pos = np.minimum(np.arange(m) / factor, n - 1)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = (pos - i0)[None, :, None]
    data = smap.data[:, i0] * (1.0 - frac) + smap.data[:, i1] * frac
    return SpatioTemporalMap(data, smap.fps * factor)


def roi_shuffle(smap: SpatioTemporalMap, seed) -> SpatioTemporalMap:
    perm = np.random.default_rng(seed).permutation(N_SUBSETS)
    return SpatioTemporalMap(smap.data[perm].copy(), smap.fps)


def map_signal(smap: SpatioTemporalMap, channel="G") -> np.ndarray:
    """Collapse a map to 1-D: mean over subset rows of one channel."""
    if channel not in MAP_CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    return smap.data[:, :, MAP_CHANNELS.index(channel)].mean(axis=0)


def signal_psd(x, fps, n_fft) -> Psd:
    """Band-normalized PSD of a 1-D signal on the grid fixed by ``(fps, n_fft)``."""
    return normalize_psd(trace_psd(x, fps, n_fft))


def map_psd(smap: SpatioTemporalMap, channel="G", n_fft=None, fps=None) -> Psd:
    """Band-normalized PSD of the row-averaged map.

    ``fps`` overrides the map's own rate; negatives built from resized maps
    use it to read them at the anchor's rate, which shifts their spectrum.
    """
    x = map_signal(smap, channel)
    return signal_psd(x, smap.fps if fps is None else fps, n_fft or default_nfft(len(x)))


def make_negative_pool(foreign_maps, hhh_map: SpatioTemporalMap, seed, fps=None, n_fft=None, channel="G"):
    """PSDs of the foreign maps, of one resized copy of each, and of ``hhh_map``.

    All PSDs are read at ``fps`` (default: ``hhh_map.fps``, the anchor video's
    rate) on a common ``n_fft`` grid. Resize factors are drawn uniformly from
    ``[0.5, 2]``. Returns ``(psds, factors)``.
    """
    foreign_maps = list(foreign_maps)
    if not foreign_maps:
        raise DegenerateError("negative pool needs at least one foreign map")
    fps = hhh_map.fps if fps is None else fps
    rng = np.random.default_rng(seed)
    factors = rng.uniform(*RESIZE_RANGE, size=len(foreign_maps))
    resized = [temporal_resize(m, f) for m, f in zip(foreign_maps, factors)]
    if n_fft is None:
        n_fft = default_nfft(max(m.n_frames for m in foreign_maps + resized + [hhh_map]))
    pool = [map_psd(m, channel, n_fft, fps) for m in foreign_maps]
    pool += [map_psd(m, channel, n_fft, fps) for m in resized]
    pool.append(map_psd(hhh_map, channel, n_fft, fps))
    return pool, factors
