"""Time the numba and numpy paths of the hot kernels on a synthetic clip.

    python benchmarks/bench_kernels.py [--frames 600] [--size 64] [--repeat 5]

Both paths are run on the same inputs and checked for agreement first.
"""
import argparse
import time

import numpy as np

from rppg_wmst import _kernels, synth
from rppg_wmst.colorspace import rgb_to_yuv
from rppg_wmst.containers import ROI_NAMES


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=600)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cfg = synth.clean_config(72, width=args.size, height=args.size, duration_s=args.frames / 30.0, jitter_px=0.3)
    clip = synth.generate_clip(cfg)
    polys = [[clip.landmarks.frames[t][name] for name in ROI_NAMES] for t in range(len(clip.landmarks))]
    h, w = cfg.height, cfg.width
    values = rgb_to_yuv(clip.video.frames)
    weights = np.random.default_rng(0).random(values.shape[:3])

    if not _kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy path is available")
        return

    codes_nb = _kernels.fill_codes(polys, h, w, use_numba=True)
    codes_np = _kernels.fill_codes(polys, h, w, use_numba=False)
    assert np.array_equal(codes_nb, codes_np)
    aw_nb, awv_nb = _kernels.pool_atoms(codes_nb, weights, values, use_numba=True)
    aw_np, awv_np = _kernels.pool_atoms(codes_nb, weights, values, use_numba=False)
    assert np.allclose(aw_nb, aw_np, rtol=1e-12) and np.allclose(awv_nb, awv_np, rtol=1e-12)

    print(f"{args.frames} frames of {w}x{h}, best of {args.repeat}")
    print(f"{'kernel':<12}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    cases = {
        "fill_codes": lambda nb: _kernels.fill_codes(polys, h, w, use_numba=nb),
        "pool_atoms": lambda nb: _kernels.pool_atoms(codes_nb, weights, values, use_numba=nb),
    }
    for name, fn in cases.items():
        t_nb = best_of(lambda: fn(True), args.repeat)
        t_np = best_of(lambda: fn(False), args.repeat)
        print(f"{name:<12}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
