"""Classical pulse extractors operating on a (T, 3) mean-RGB trace."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import _kernels
from .containers import LandmarkTrack, Video
from .errors import ConvergenceError, DegenerateError, FormatError
from .roi import track_codes
from .spectral import bandpass, detrend, psd

WINDOW_SECONDS = 1.6
DEFAULT_PBV = np.array([0.33, 0.78, 0.53]) / np.linalg.norm([0.33, 0.78, 0.53])
PBV_RIDGE = 1e-9
ICA_MAX_ITER = 200
ICA_TOL = 1e-6
ICA_MIN_STEP = 1.0 / 16

METHODS = ("ica", "pca", "chrom", "pbv", "pos", "lgi")


def spatial_rgb_trace(video: Video, track: LandmarkTrack) -> np.ndarray:
    """Unweighted per-frame mean RGB over the union of the six ROIs."""
    if len(track) != video.n_frames:
        raise FormatError(f"{len(track)} landmark frames for a {video.n_frames}-frame video")
    codes = track_codes(track, video.height, video.width)
    atom_n, atom_sum = _kernels.pool_atoms(codes, np.ones(codes.shape), video.frames)
    return atom_sum[:, 1:].sum(axis=1) / atom_n[:, 1:].sum(axis=1)[:, None]


def _check_trace(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 2 or rgb.shape[1] != 3:
        raise FormatError(f"expected a (T, 3) RGB trace, got {rgb.shape}")
    if not np.all(np.isfinite(rgb)):
        raise FormatError("non-finite trace samples")
    return rgb


def _mean_normalized(rgb):
    mean = rgb.mean(axis=0)
    if np.any(mean <= 0):
        raise DegenerateError("channel with zero mean cannot be normalized")
    return rgb / mean


def _window_starts(n, win):
    hop = win // 2
    starts = list(range(0, n - win + 1, hop))
    if starts and starts[-1] + win < n:
        starts.append(n - win)
    return starts


def _window_len(fps, n):
    win = int(round(WINDOW_SECONDS * fps))
    win += win % 2
    if n < win:
        raise DegenerateError(f"trace of {n} samples is shorter than one {win}-sample window")
    return win


def _ratio(num, den):
    sd = den.std()
    return num.std() / sd if sd > 0 else 0.0


def _zero_mean(x):
    return x - x.mean()


def chrom(rgb, fps):
    """Chrominance method: alpha-tuned X/Y difference, Hann overlap-add."""
    rgb = _check_trace(rgb)
    n = len(rgb)
    win = _window_len(fps, n)
    running = uniform_filter1d(rgb, size=win, axis=0, mode="nearest")
    if np.any(running <= 0):
        raise DegenerateError("running mean must be positive")
    cn = rgb / running - 1.0
    x = bandpass(3.0 * cn[:, 0] - 2.0 * cn[:, 1], fps)
    y = bandpass(1.5 * cn[:, 0] + cn[:, 1] - 1.5 * cn[:, 2], fps)
    hann = np.hanning(win)
    out = np.zeros(n)
    for s in _window_starts(n, win):
        xw, yw = x[s:s + win], y[s:s + win]
        seg = xw - _ratio(xw, yw) * yw
        out[s:s + win] += hann * _zero_mean(seg)
    return _zero_mean(bandpass(out, fps))


def pos(rgb, fps):
    """Plane-orthogonal-to-skin projection with per-window alpha tuning."""
    rgb = _check_trace(rgb)
    n = len(rgb)
    win = _window_len(fps, n)
    hann = np.hanning(win)
    out = np.zeros(n)
    for s in _window_starts(n, win):
        cw = rgb[s:s + win]
        mean = cw.mean(axis=0)
        if np.any(mean <= 0):
            continue
        cn = cw / mean
        s1 = cn[:, 1] - cn[:, 2]
        s2 = cn[:, 1] + cn[:, 2] - 2.0 * cn[:, 0]
        h = s1 + _ratio(s1, s2) * s2
        out[s:s + win] += hann * _zero_mean(h)
    return _zero_mean(bandpass(out, fps))


def pbv(rgb, fps, pbv_vector=DEFAULT_PBV):
    """Blood-volume-pulse signature projection ``W = Sigma^-1 pbv``."""
    rgb = _check_trace(rgb)
    sig = np.asarray(pbv_vector, dtype=np.float64)
    norm = np.linalg.norm(sig)
    if sig.shape != (3,) or not norm > 0:
        raise ValueError("pbv_vector must be a nonzero 3-vector")
    sig = sig / norm
    cn = bandpass((_mean_normalized(rgb) - 1.0).T, fps).T
    cov = cn.T @ cn / len(cn)
    if np.linalg.cond(cov) > 1e12:
        cov = cov + PBV_RIDGE * np.eye(3)
    w = np.linalg.solve(cov, sig)
    return _zero_mean(cn @ w / (sig @ w))


def lgi(rgb, fps):
    """Remove the dominant singular direction, keep the most pulsatile residual."""
    rgb = _check_trace(rgb)
    cn = _mean_normalized(rgb)
    _, sv, vt = np.linalg.svd(cn, full_matrices=False)
    if not sv[0] > 0:
        raise DegenerateError("rank-0 trace")
    v1 = vt[0]
    proj = cn - np.outer(cn @ v1, v1)
    scores = [_inband_power(proj[:, k], fps) for k in range(3)]
    return _zero_mean(proj[:, int(np.argmax(scores))])


def _inband_power(x, fps):
    p = psd(x, fps)
    return p.power[p.in_band()].sum()


def _peak_ratio(x, fps):
    p = psd(detrend(x), fps)
    total = p.power.sum()
    if not total > 0:
        return 0.0
    return p.power[p.in_band()].max() / total


def _sign_fix(loadings, comps):
    # make the largest-magnitude loading of each component positive
    idx = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[idx, np.arange(loadings.shape[1])])
    signs[signs == 0] = 1.0
    return loadings * signs, comps * signs


def pca_components(rgb):
    """Principal components of the mean-normalized trace, by decreasing variance.

    Returns ``(components (T, 3), loadings (3, 3), variances (3,))``.
    """
    rgb = _check_trace(rgb)
    x = _mean_normalized(rgb) - 1.0
    x = x - x.mean(axis=0)
    cov = x.T @ x / len(x)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evecs, comps = _sign_fix(evecs, x @ evecs)
    return comps, evecs, evals


def pca_rppg(rgb, fps):
    comps, _, _ = pca_components(rgb)
    scores = [_peak_ratio(comps[:, k], fps) for k in range(3)]
    return _zero_mean(comps[:, int(np.argmax(scores))])


def _sym_decorrelate(w):
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def fastica(x, seed=0, max_iter=ICA_MAX_ITER, tol=ICA_TOL):
    """Symmetric FastICA with a tanh contrast on data ``x`` of shape (T, k).

    Uses the stabilized fixed-point step: the step size starts at 1 (the
    plain Newton update) and halves, down to 1/16, whenever the change in
    the unmixing rows fails to shrink. This keeps near-Gaussian sources from
    dragging the whole symmetric update into oscillation.

    Returns ``(sources (T, k), mixing (k, k))`` where ``x ~ sources @ mixing.T``
    up to the mean.
    """
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean(axis=0)
    n, k = x.shape
    evals, evecs = np.linalg.eigh(x.T @ x / n)
    if np.any(evals <= evals.max() * 1e-14):
        raise DegenerateError("rank-deficient input, cannot whiten")
    whiten = (evecs / np.sqrt(evals)).T
    z = x @ whiten.T
    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((k, k)))
    step, prev = 1.0, np.inf
    for _ in range(max_iter):
        y = z @ w.T
        g = np.tanh(y)
        beta = -(y * g).mean(axis=0)
        alpha = -1.0 / (beta + (1.0 - g * g).mean(axis=0))
        w_new = _sym_decorrelate(w + step * alpha[:, None] * ((np.diag(beta) + g.T @ y / n) @ w))
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if lim < tol:
            break
        if lim >= prev:
            step = max(step * 0.5, ICA_MIN_STEP)
        prev = lim
    else:
        raise ConvergenceError("FastICA did not converge", max_iter)
    unmix = w @ whiten
    return x @ unmix.T, np.linalg.pinv(unmix)


def ica_rppg(rgb, fps, seed=0):
    rgb = _check_trace(rgb)
    x = _mean_normalized(rgb) - 1.0
    sources, mixing = fastica(x, seed=seed)
    mixing, sources = _sign_fix(mixing, sources)
    scores = [_peak_ratio(sources[:, k], fps) for k in range(sources.shape[1])]
    return _zero_mean(sources[:, int(np.argmax(scores))])


def extract(method, rgb, fps, seed=0, pbv_vector=DEFAULT_PBV):
    """Dispatch by method name (one of ``METHODS``)."""
    if method == "ica":
        return ica_rppg(rgb, fps, seed=seed)
    if method == "pbv":
        return pbv(rgb, fps, pbv_vector)
    funcs = {"pca": pca_rppg, "chrom": chrom, "pos": pos, "lgi": lgi}
    if method not in funcs:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return funcs[method](rgb, fps)

