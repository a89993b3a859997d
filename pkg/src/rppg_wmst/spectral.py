"""Detrending, band-limiting, periodogram PSD, heart rate and SNR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import DegenerateError

BAND = (0.5, 3.0)
MIN_NFFT = 2048
FUNDAMENTAL_HALF_WIDTH = 0.1
HARMONIC_HALF_WIDTH = 0.2


@dataclass
class Psd:
    freqs: np.ndarray
    power: np.ndarray
    band: tuple[float, float] = BAND
    normalized: bool = False

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def in_band(self) -> np.ndarray:
        lo, hi = self.band
        return (self.freqs >= lo) & (self.freqs <= hi)


def _second_difference_normal_bands(n, lam):
    """Upper banded form of ``I + lam^2 D2^T D2`` for ``solveh_banded``."""
    l2 = lam * lam
    diag = np.full(n, 6.0)
    diag[[0, -1]] = 1.0
    diag[[1, -2]] = 5.0
    off1 = np.full(n - 1, -4.0)
    off1[[0, -1]] = -2.0
    off2 = np.ones(n - 2)
    ab = np.zeros((3, n))
    ab[2] = 1.0 + l2 * diag
    ab[1, 1:] = l2 * off1
    ab[0, 2:] = l2 * off2
    return ab


def detrend(x, lam=100.0):
    """Smoothness-priors detrending: ``x - (I + lam^2 D2^T D2)^-1 x``."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 3:
        raise DegenerateError(f"detrend needs at least 3 samples, got {n}")
    # the smoother passes constants through, so centering first changes nothing
    # except that a constant input now comes out as exact zeros
    x = x - x.mean()
    if n == 3:
        d2 = np.array([[1.0, -2.0, 1.0]])
        return x - np.linalg.solve(np.eye(3) + lam * lam * d2.T @ d2, x)
    return x - solveh_banded(_second_difference_normal_bands(n, lam), x)


def bandpass(x, fps, f_lo=BAND[0], f_hi=BAND[1]):
    """Ideal FFT-mask band-pass: zero every bin with ``|f|`` outside ``[f_lo, f_hi]``."""
    if not fps > 2 * f_hi:
        raise DegenerateError(f"fps {fps} is below twice the upper band edge {f_hi}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    f = np.fft.rfftfreq(n, d=1.0 / fps)
    spec[..., (f < f_lo) | (f > f_hi)] = 0.0
    return np.fft.irfft(spec, n=n, axis=-1)


def default_nfft(n):
    return max(MIN_NFFT, 1 << max(0, int(n - 1).bit_length()))


def psd(x, fps, n_fft=None) -> Psd:
    """One-sided zero-padded periodogram of the mean-removed signal.

    Scaled so that the powers sum to the mean square of the input, i.e.
    ``P_k = c_k |X_k|^2 / (T * n_fft)`` with ``c_k = 2`` off DC/Nyquist.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 4:
        raise DegenerateError(f"PSD needs at least 4 samples, got {n}")
    if n_fft is None:
        n_fft = default_nfft(n)
    if n_fft < n:
        raise ValueError(f"n_fft={n_fft} is shorter than the signal ({n})")
    x = x - x.mean()
    spec = np.fft.rfft(x, n=n_fft)
    power = np.abs(spec) ** 2 / (n * n_fft)
    if n_fft % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    return Psd(np.fft.rfftfreq(n_fft, d=1.0 / fps), power)


def normalize_psd(p: Psd) -> Psd:
    sel = p.in_band()
    total = p.power[sel].sum()
    if not total > 0:
        raise DegenerateError("zero in-band power")
    return Psd(p.freqs[sel].copy(), p.power[sel] / total, p.band, normalized=True)


def estimate_hr(p: Psd) -> float:
    """Heart rate in bpm at the in-band PSD maximum (first maximum on ties)."""
    sel = np.flatnonzero(p.in_band())
    if sel.size == 0 or not p.power[sel].max() > 0:
        raise DegenerateError("zero in-band power")
    return 60.0 * float(p.freqs[sel[np.argmax(p.power[sel])]])


def snr(p: Psd, ref_hr_bpm=None) -> float:
    """Signal-to-noise ratio in dB around the fundamental and first harmonic.

    Signal: bins within 0.1 Hz of ``f0`` (inside the band) plus bins within
    0.2 Hz of ``2 f0`` (anywhere on the axis). Noise: every other in-band bin.
    ``f0`` is ``ref_hr_bpm / 60`` or, without a reference, the in-band peak.
    Returns ``inf`` when there is no noise power.
    """
    if ref_hr_bpm is None:
        f0 = estimate_hr(p) / 60.0
    else:
        if not 30.0 <= ref_hr_bpm <= 180.0:
            raise ValueError(f"reference HR {ref_hr_bpm} bpm outside [30, 180]")
        f0 = ref_hr_bpm / 60.0
    band = p.in_band()
    fund = band & (np.abs(p.freqs - f0) <= FUNDAMENTAL_HALF_WIDTH)
    harm = np.abs(p.freqs - 2.0 * f0) <= HARMONIC_HALF_WIDTH
    signal_bins = fund | harm
    p_sig = p.power[signal_bins].sum()
    p_noise = p.power[band & ~signal_bins].sum()
    if p_noise <= 0:
        return math.inf
    if p_sig <= 0:
        return -math.inf
    return 10.0 * math.log10(p_sig / p_noise)


def trace_psd(x, fps, n_fft=None, band_limit=True) -> Psd:
    """Detrend, optionally band-pass, then PSD: the conditioning used for HR."""
    y = detrend(x)
    if band_limit:
        y = bandpass(y, fps)
    return psd(y, fps, n_fft)


def trace_hr(x, fps, n_fft=None) -> float:
    return estimate_hr(trace_psd(x, fps, n_fft))


def trace_snr(x, fps, ref_hr_bpm=None, n_fft=None) -> float:
    return snr(trace_psd(x, fps, n_fft, band_limit=False), ref_hr_bpm)
