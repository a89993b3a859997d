"""Binary and text file formats for videos, landmark tracks, maps and traces.

All multi-byte numbers are little-endian.

``.rpgv`` raw video::

    magic "RPGV" | version u16 | width u32 | height u32 | frames u32 |
    channels u8 | fps f32 | frames*height*width*3 bytes (interleaved RGB)

``.rpgm`` map::

    magic "RPGM" | version u16 | rows u32 | frames u32 | channels u32 |
    fps f32 | rows*frames*channels f32 (row-major)
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .containers import MAP_CHANNELS, N_SUBSETS, ROI_NAMES, LandmarkTrack, SpatioTemporalMap, Video
from .errors import FormatError

VIDEO_MAGIC = b"RPGV"
MAP_MAGIC = b"RPGM"
FORMAT_VERSION = 1

_VIDEO_HEADER = struct.Struct("<4sHIIIBf")
_MAP_HEADER = struct.Struct("<4sHIIIf")

TRACE_SPACING_TOL = 1e-9


def quantize(frames: np.ndarray) -> np.ndarray:
    """Map [0, 1] samples to the 8-bit grid used on disk."""
    return np.clip(np.rint(np.asarray(frames) * 255.0), 0, 255).astype(np.uint8)


def write_raw_video(video: Video, path) -> None:
    n, h, w, c = video.frames.shape
    if w < 8 or h < 8:
        raise FormatError(f"frames must be at least 8x8, got {w}x{h}")
    header = _VIDEO_HEADER.pack(VIDEO_MAGIC, FORMAT_VERSION, w, h, n, c, video.fps)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantize(video.frames).tobytes(order="C"))


def read_raw_video(path) -> Video:
    blob = Path(path).read_bytes()
    if len(blob) < _VIDEO_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, w, h, n, c, fps = _VIDEO_HEADER.unpack_from(blob)
    if magic != VIDEO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if c != 3:
        raise FormatError(f"{path}: expected 3 channels, got {c}")
    if w < 8 or h < 8:
        raise FormatError(f"{path}: frames must be at least 8x8, got {w}x{h}")
    if not (math.isfinite(fps) and fps > 0):
        raise FormatError(f"{path}: invalid fps {fps}")
    payload = memoryview(blob)[_VIDEO_HEADER.size:]
    expected = n * h * w * c
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header declares {expected}")
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w, c)
    return Video(frames.astype(np.float64) / 255.0, float(fps))


def write_landmarks(track: LandmarkTrack, path, width: int, height: int) -> None:
    _validate_track(track, width, height)
    doc = {
        "width": int(width),
        "height": int(height),
        "frames": [
            {name: [[float(x), float(y)] for x, y in np.asarray(frame[name])] for name in ROI_NAMES}
            for frame in track.frames
        ],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def read_landmarks(path, n_frames: int | None = None) -> tuple[LandmarkTrack, int, int]:
    """Load a landmark track; returns ``(track, width, height)``."""
    try:
        doc = json.loads(Path(path).read_text())
        width, height, raw_frames = int(doc["width"]), int(doc["height"]), doc["frames"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: not a landmark document ({exc})") from exc
    frames = []
    for t, raw in enumerate(raw_frames):
        missing = [name for name in ROI_NAMES if name not in raw]
        if missing:
            raise FormatError(f"{path}: frame {t} is missing ROI {missing[0]!r}")
        extra = sorted(set(raw) - set(ROI_NAMES))
        if extra:
            raise FormatError(f"{path}: frame {t} has unknown ROI {extra[0]!r}")
        try:
            frames.append({name: np.asarray(raw[name], dtype=np.float64).reshape(-1, 2) for name in ROI_NAMES})
        except ValueError as exc:
            raise FormatError(f"{path}: frame {t} has malformed vertices") from exc
    track = LandmarkTrack(frames)
    _validate_track(track, width, height)
    if n_frames is not None and len(track) != n_frames:
        raise FormatError(f"{path}: {len(track)} landmark frames for a {n_frames}-frame video")
    return track, width, height


def _validate_track(track: LandmarkTrack, width: int, height: int) -> None:
    for t, frame in enumerate(track.frames):
        if set(frame) != set(ROI_NAMES):
            missing = [name for name in ROI_NAMES if name not in frame]
            raise FormatError(f"frame {t}: ROI set mismatch, missing {missing}")
        for name in ROI_NAMES:
            poly = np.asarray(frame[name], dtype=np.float64)
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
                raise FormatError(f"frame {t}: ROI {name!r} needs at least 3 vertices")
            if not np.all(np.isfinite(poly)):
                raise FormatError(f"frame {t}: ROI {name!r} has non-finite vertices")
            xs, ys = poly[:, 0], poly[:, 1]
            if xs.min() < 0 or ys.min() < 0 or xs.max() > width or ys.max() > height:
                raise FormatError(f"frame {t}: ROI {name!r} has a vertex outside [0,{width}]x[0,{height}]")


def write_map(smap: SpatioTemporalMap, path) -> None:
    rows, n, c = smap.data.shape
    payload = np.ascontiguousarray(smap.data, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise FormatError("map contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(_MAP_HEADER.pack(MAP_MAGIC, FORMAT_VERSION, rows, n, c, smap.fps))
        fh.write(payload.tobytes())


def read_map(path) -> SpatioTemporalMap:
    blob = Path(path).read_bytes()
    if len(blob) < _MAP_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, n, c, fps = _MAP_HEADER.unpack_from(blob)
    if magic != MAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if rows != N_SUBSETS or c != len(MAP_CHANNELS):
        raise FormatError(f"{path}: expected {N_SUBSETS} rows x {len(MAP_CHANNELS)} channels, got {rows} x {c}")
    if not (math.isfinite(fps) and fps > 0):
        raise FormatError(f"{path}: invalid fps {fps}")
    payload = memoryview(blob)[_MAP_HEADER.size:]
    expected = rows * n * c * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header declares {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, n, c)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite map values")
    return SpatioTemporalMap(data.astype(np.float64), float(fps))


def format_trace(values: np.ndarray, fps: float) -> str:
    buf = _io.StringIO()
    buf.write("t,value\n")
    for i, v in enumerate(np.asarray(values, dtype=np.float64)):
        buf.write(f"{i / fps!r},{float(v)!r}\n")
    return buf.getvalue()


def write_trace(values: np.ndarray, fps: float, path) -> None:
    Path(path).write_text(format_trace(values, fps))


def read_trace(path) -> tuple[np.ndarray, float]:
    """Load a trace CSV; returns ``(values, fps)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "value"]:
            raise FormatError(f"{path}: expected header 't,value', got {header}")
        try:
            rows = [(float(a), float(b)) for a, b in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: malformed row ({exc})") from exc
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least 2 samples")
    t = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows])
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise FormatError(f"{path}: time column must be strictly increasing")
    step = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(dt - step)) > TRACE_SPACING_TOL:
        raise FormatError(f"{path}: non-uniform sample spacing")
    # frame rates are stored implicitly; 6 decimals absorbs the division round-off
    return values, round(1.0 / step, 6)
