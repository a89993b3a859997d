"""One-sided paired significance tests for SNR improvements."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateError, FormatError
from .spectral import trace_snr

BETACF_TOL = 1e-15
BETACF_MAX_ITER = 10_000
WILCOXON_MIN_N = 5
# below this many nonzero deltas the null distribution is enumerated exactly
WILCOXON_EXACT_MAX_N = 20


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float
    n: int

    __test__ = False  # keep pytest from collecting this class


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc_regularized(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf(t, df):
    """Upper tail ``P(T > t)`` of Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc_regularized(df / 2.0, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def _deltas(deltas):
    d = np.asarray(deltas, dtype=np.float64).ravel()
    if not np.all(np.isfinite(d)):
        raise DegenerateError("deltas must be finite")
    return d


def paired_t_one_sided(deltas) -> TestReport:
    """Test ``mean(delta) > 0``; sd uses the n - 1 denominator."""
    d = _deltas(deltas)
    n = len(d)
    if n < 2:
        raise DegenerateError(f"t-test needs n >= 2, got {n}")
    mean = d.mean()
    sd = d.std(ddof=1)
    # equal deltas can still give sd ~ 1e-16 from rounding in the mean
    if sd == 0.0 or np.all(d == d[0]):
        p = 0.0 if mean > 0 else (1.0 if mean < 0 else 0.5)
        t = math.copysign(math.inf, mean) if mean != 0 else 0.0
        return TestReport("paired t-test", t, p, n)
    t = float(mean / (sd / math.sqrt(n)))
    return TestReport("paired t-test", t, t_sf(t, n - 1), n)


def normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _exact_upper_tail(ranks, w_plus):
    # ranks may be half-integers under ties; doubled they are integers
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[:-r].copy()
    threshold = int(round(2.0 * w_plus))
    return float(counts[threshold:].sum() / counts.sum())


def wilcoxon_one_sided(deltas, method="auto") -> TestReport:
    """Wilcoxon signed-rank test of a positive location shift.

    Zero deltas are dropped, ties get average ranks. ``method="normal"`` uses
    ``z = (W+ - n(n+1)/4 - 0.5) / sigma`` with the tie-corrected variance;
    ``"exact"`` counts the sign-flip null distribution of the observed ranks.
    ``"auto"`` is exact up to ``WILCOXON_EXACT_MAX_N`` nonzero deltas, where
    the normal tail can be off by almost 0.02, and normal above it.
    """
    if method not in ("auto", "normal", "exact"):
        raise ValueError(f"unknown method {method!r}")
    d = _deltas(deltas)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise DegenerateError("all deltas are zero")
    if n < WILCOXON_MIN_N:
        raise DegenerateError(f"Wilcoxon needs at least {WILCOXON_MIN_N} nonzero deltas, got {n}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if method == "exact" or (method == "auto" and n <= WILCOXON_EXACT_MAX_N):
        return TestReport("Wilcoxon signed-rank", w_plus, _exact_upper_tail(ranks, w_plus), n)
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = (w_plus - n * (n + 1) / 4.0 - 0.5) / math.sqrt(var)
    return TestReport("Wilcoxon signed-rank", w_plus, normal_sf(z), n)


@dataclass
class CompareReport:
    clip_ids: list
    snr_wmst: np.ndarray
    snr_mst: np.ndarray
    t_test: TestReport
    wilcoxon: TestReport
    channel: str = "G"
    extra: dict = field(default_factory=dict)

    @property
    def deltas(self):
        return self.snr_wmst - self.snr_mst

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["clip_id", "snr_wmst", "snr_mst", "delta"])
        for cid, a, b in zip(self.clip_ids, self.snr_wmst, self.snr_mst):
            writer.writerow([cid, f"{a:.6f}", f"{b:.6f}", f"{a - b:.6f}"])
        return buf.getvalue()

    def summary(self) -> str:
        d = self.deltas
        lines = [
            f"One-sided tests of SNR improvement ({self.channel} channel, all-ROI row)",
            "H0: no improvement in SNR; H1: SNR(WMST) - SNR(MST) > 0",
            f"n = {len(d)}, mean delta = {d.mean():.4f} dB, median delta = {np.median(d):.4f} dB",
            "",
            f"{'Test':<22}{'statistic':>14}{'p-value':>14}",
        ]
        for rep in (self.t_test, self.wilcoxon):
            lines.append(f"{rep.test:<22}{rep.statistic:>14.4f}{rep.p_value:>14.4e}")
        return "\n".join(lines) + "\n"


def snr_compare(wmst_maps, mst_maps, refs, clip_ids=None, channel="G") -> CompareReport:
    """Per-clip SNR of the all-ROI row of each map, paired deltas, both tests."""
    if not (len(wmst_maps) == len(mst_maps) == len(refs)):
        raise FormatError(f"length mismatch: {len(wmst_maps)} WMST, {len(mst_maps)} MST, {len(refs)} references")
    if clip_ids is None:
        clip_ids = [f"clip_{i:03d}" for i in range(len(refs))]
    elif len(clip_ids) != len(refs):
        raise FormatError("clip_ids length mismatch")
    a = np.array([trace_snr(m.row(63, channel), m.fps, r) for m, r in zip(wmst_maps, refs)])
    b = np.array([trace_snr(m.row(63, channel), m.fps, r) for m, r in zip(mst_maps, refs)])
    d = a - b
    return CompareReport(list(clip_ids), a, b, paired_t_one_sided(d), wilcoxon_one_sided(d), channel)
