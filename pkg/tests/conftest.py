import numpy as np
import pytest

from rppg_wmst.containers import ROI_NAMES, LandmarkTrack, Video
from rppg_wmst.synth import roi_polygons


def small_track(n_frames, width=16, height=16, rng=None, jitter=0.0):
    """The synthetic layout scaled to a small frame, optionally jittered per frame."""
    base = roi_polygons(width, height)
    frames = []
    for _ in range(n_frames):
        off = np.zeros(2) if rng is None or jitter == 0 else rng.uniform(-jitter, jitter, size=2)
        frames.append({name: np.clip(base[name] + off, 0.0, [width, height]) for name in ROI_NAMES})
    return LandmarkTrack(frames)


def random_video(rng, n_frames=16, height=16, width=16, fps=30.0):
    return Video(rng.uniform(0.05, 0.95, size=(n_frames, height, width, 3)), fps)


def central_diff(f, x, h=1e-6):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
