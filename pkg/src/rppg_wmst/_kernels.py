"""Hot per-pixel loops: polygon scanline fill and ROI-atom pooling.

Each kernel has a numba implementation and a pure-numpy one with identical
semantics. Set ``RPPG_DISABLE_NUMBA=1`` to force the numpy path; it is also
used when numba cannot be imported. ``RPPG_THREADS`` caps numba threads.
"""
from __future__ import annotations

import os

import numpy as np

N_ATOMS = 64


def _flag(name):
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # the bundled TBB is often too old and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag("RPPG_DISABLE_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"

if HAVE_NUMBA and os.environ.get("RPPG_THREADS"):
    numba.set_num_threads(max(1, min(int(os.environ["RPPG_THREADS"]), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------- numpy path


def _fill_codes_numpy(verts, offsets, n_polys_per_frame, height, width):
    n_frames = (len(offsets) - 1) // n_polys_per_frame
    codes = np.zeros((n_frames, height, width), dtype=np.uint8)
    xc = np.arange(width, dtype=np.float64) + 0.5
    yc = np.arange(height, dtype=np.float64) + 0.5
    for f in range(n_frames):
        for p in range(n_polys_per_frame):
            k = f * n_polys_per_frame + p
            poly = verts[offsets[k]:offsets[k + 1]]
            x0, y0 = poly[:, 0], poly[:, 1]
            x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
            # (rows, edges): does the scanline cross the edge, and where
            crosses = (y0[None, :] > yc[:, None]) != (y1[None, :] > yc[:, None])
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x0[None, :] + (yc[:, None] - y0[None, :]) * (x1 - x0)[None, :] / (y1 - y0)[None, :]
            right = crosses[:, None, :] & (xi[:, None, :] > xc[None, :, None])
            inside = (right.sum(axis=2) % 2) == 1
            codes[f][inside] |= np.uint8(1 << p)
    return codes


def _pool_atoms_numpy(codes, weights, values):
    n_frames = codes.shape[0]
    n_ch = values.shape[-1]
    idx = (codes.reshape(n_frames, -1).astype(np.int64) + N_ATOMS * np.arange(n_frames)[:, None]).ravel()
    w = weights.reshape(-1)
    size = n_frames * N_ATOMS
    atom_w = np.bincount(idx, weights=w, minlength=size).reshape(n_frames, N_ATOMS)
    vals = values.reshape(-1, n_ch)
    atom_wv = np.empty((n_frames, N_ATOMS, n_ch))
    for c in range(n_ch):
        atom_wv[:, :, c] = np.bincount(idx, weights=w * vals[:, c], minlength=size).reshape(n_frames, N_ATOMS)
    return atom_w, atom_wv


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _fill_one(codes2d, poly, bit):
        h, w = codes2d.shape
        n = poly.shape[0]
        xs = np.empty(n)
        for y in range(h):
            yc = y + 0.5
            m = 0
            for e in range(n):
                x0, y0 = poly[e, 0], poly[e, 1]
                x1, y1 = poly[(e + 1) % n, 0], poly[(e + 1) % n, 1]
                if (y0 > yc) != (y1 > yc):
                    xs[m] = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
                    m += 1
            if m == 0:
                continue
            cr = np.sort(xs[:m])
            for k in range(0, m - 1, 2):
                lo, hi = cr[k], cr[k + 1]
                start = max(0, int(np.floor(lo)) - 1)
                stop = min(w, int(np.ceil(hi)) + 1)
                for x in range(start, stop):
                    xc = x + 0.5
                    if lo <= xc < hi:
                        codes2d[y, x] |= bit

    @njit(cache=True, parallel=True)
    def _fill_codes_numba(verts, offsets, n_polys_per_frame, height, width):
        n_frames = (offsets.shape[0] - 1) // n_polys_per_frame
        codes = np.zeros((n_frames, height, width), dtype=np.uint8)
        for f in prange(n_frames):
            for p in range(n_polys_per_frame):
                k = f * n_polys_per_frame + p
                _fill_one(codes[f], verts[offsets[k]:offsets[k + 1]], np.uint8(1 << p))
        return codes

    @njit(cache=True, parallel=True)
    def _pool_atoms_numba(codes, weights, values):
        n_frames, h, w = codes.shape
        n_ch = values.shape[3]
        atom_w = np.zeros((n_frames, N_ATOMS))
        atom_wv = np.zeros((n_frames, N_ATOMS, n_ch))
        for f in prange(n_frames):
            for y in range(h):
                for x in range(w):
                    a = codes[f, y, x]
                    wt = weights[f, y, x]
                    atom_w[f, a] += wt
                    for c in range(n_ch):
                        atom_wv[f, a, c] += wt * values[f, y, x, c]
        return atom_w, atom_wv


# ---------------------------------------------------------------- dispatch


def _pack_polygons(polygons_per_frame):
    flat = [np.asarray(p, dtype=np.float64) for frame in polygons_per_frame for p in frame]
    offsets = np.zeros(len(flat) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(p) for p in flat])
    verts = np.concatenate(flat, axis=0) if flat else np.zeros((0, 2))
    return np.ascontiguousarray(verts), offsets


def fill_codes(polygons_per_frame, height, width, use_numba=None):
    """Rasterize polygons to per-pixel bit codes.

    ``polygons_per_frame[t][p]`` is an ``(N, 2)`` vertex array; bit ``p`` of
    ``codes[t, y, x]`` is set when pixel center ``(x + .5, y + .5)`` lies
    inside polygon ``p`` under the even-odd rule.
    """
    n_polys = len(polygons_per_frame[0])
    if n_polys > 8:
        raise ValueError("at most 8 polygons per frame fit in a uint8 code")
    verts, offsets = _pack_polygons(polygons_per_frame)
    if USE_NUMBA if use_numba is None else use_numba:
        return _fill_codes_numba(verts, offsets, n_polys, height, width)
    return _fill_codes_numpy(verts, offsets, n_polys, height, width)


def pool_atoms(codes, weights, values, use_numba=None):
    """Sum weights and weighted values per (frame, code) atom.

    Returns ``atom_w`` of shape (T, 64) and ``atom_wv`` of shape (T, 64, C).
    """
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if USE_NUMBA if use_numba is None else use_numba:
        return _pool_atoms_numba(codes, weights, values)
    return _pool_atoms_numpy(codes, weights, values)
