"""Seeded synthetic face-patch videos with a known pulse and optional corruptions.

A clip is a flat elliptical "face" with a faint static texture over a plain
background. Six fixed, non-overlapping ROI polygons sit on the face. Every
face pixel is modulated by ``1 + A * d * bvp(t)``, i.e. the pulse runs along a
fixed direction ``d`` in mean-normalized RGB. Corruptions
are applied in a fixed order: specular blobs, shadow, jitter, sensor noise;
each reports a per-frame ground-truth mask of the pixels it altered.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import shift as nd_shift

from .containers import ROI_NAMES, LandmarkTrack, Video
from .io import quantize
from .spectral import BAND

DEFAULT_BASE_SKIN = (0.62, 0.45, 0.28)
BACKGROUND = (0.20, 0.22, 0.25)
DEFAULT_PBV = (0.33, 0.78, 0.53)
MASK_LEVEL = 0.02

# ROI layout as fractions of (width, height)
ROI_LAYOUT = {
    "forehead": [(0.30, 0.12), (0.70, 0.12), (0.66, 0.30), (0.34, 0.30)],
    "mouth": [(0.40, 0.74), (0.60, 0.74), (0.66, 0.80), (0.60, 0.86), (0.40, 0.86), (0.34, 0.80)],
    "left_cheek_1": [(0.16, 0.36), (0.32, 0.36), (0.32, 0.52), (0.18, 0.52)],
    "left_cheek_2": [(0.18, 0.56), (0.32, 0.56), (0.32, 0.70), (0.22, 0.70)],
    "right_cheek_1": [(0.68, 0.36), (0.84, 0.36), (0.82, 0.52), (0.68, 0.52)],
    "right_cheek_2": [(0.68, 0.56), (0.82, 0.56), (0.78, 0.70), (0.68, 0.70)],
}
SPECULAR_ROIS = ("forehead", "left_cheek_1", "left_cheek_2", "right_cheek_1", "right_cheek_2")


@dataclass(frozen=True)
class SpecularConfig:
    count: int = 0
    radius: float = 4.0
    intensity: float = 0.7


@dataclass(frozen=True)
class ShadowConfig:
    depth: float = 0.0
    drift_speed: float = 12.0  # px/s


@dataclass(frozen=True)
class SynthConfig:
    width: int = 64
    height: int = 64
    fps: float = 30.0
    duration_s: float = 20.0
    hr_bpm: float = 72.0
    pulse_amplitude: float = 0.004
    pbv_direction: tuple = DEFAULT_PBV
    base_skin_rgb: tuple = DEFAULT_BASE_SKIN
    specular: SpecularConfig = field(default_factory=SpecularConfig)
    shadow: ShadowConfig = field(default_factory=ShadowConfig)
    jitter_px: float = 0.0
    sensor_noise: float = 0.0
    seed: int = 0

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    def validate(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("synthetic clips must be at least 32x32")
        if not 30.0 <= self.hr_bpm <= 180.0:
            raise ValueError(f"hr_bpm {self.hr_bpm} outside [30, 180]")
        if self.n_frames < 4:
            raise ValueError("clip too short")
        if self.pulse_amplitude < 0 or self.sensor_noise < 0 or self.jitter_px < 0:
            raise ValueError("amplitudes must be non-negative")
        direction = np.asarray(self.pbv_direction, float)
        base = np.asarray(self.base_skin_rgb, float)
        # bvp peaks at most 1.4 in magnitude; texture peaks at 1.04
        swing = 1.4 * self.pulse_amplitude * np.abs(direction / np.linalg.norm(direction))
        if np.any(swing >= 1) or np.any(base * 1.04 * (1 + swing) > 1):
            raise ValueError("pulse amplitude pushes skin samples outside [0, 1]")
        if not 0.0 <= self.shadow.depth < 1.0:
            raise ValueError("shadow depth must lie in [0, 1)")
        if not 0.0 <= self.specular.intensity <= 1.0:
            raise ValueError("specular intensity must lie in [0, 1]")


@dataclass
class GroundTruth:
    bvp: np.ndarray
    hr_bpm: float
    specular_mask: np.ndarray
    shadow_mask: np.ndarray
    jitter: np.ndarray


@dataclass
class Clip:
    video: Video
    landmarks: LandmarkTrack
    truth: GroundTruth
    config: SynthConfig


def bvp_waveform(t, hr_bpm):
    f = hr_bpm / 60.0
    return np.sin(2 * np.pi * f * t) + 0.4 * np.sin(4 * np.pi * f * t + 0.7)


def roi_polygons(width, height, offset=(0.0, 0.0)):
    scale = np.array([width, height], dtype=np.float64)
    return {name: np.asarray(ROI_LAYOUT[name]) * scale + np.asarray(offset) for name in ROI_NAMES}


def _band_limited(rng, n, fps):
    """Random in-band modulation normalized to [0, 1]."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fps)
    spec[(f < BAND[0]) | (f > BAND[1])] = 0
    x = np.fft.irfft(spec, n)
    span = x.max() - x.min()
    return (x - x.min()) / span if span > 0 else np.zeros(n)


def render_base(config: SynthConfig):
    """Uncorrupted clip frames (T, H, W, 3) and the bvp waveform."""
    h, w, n = config.height, config.width, config.n_frames
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    cx, cy = w / 2, h / 2
    r = np.sqrt(((xx - cx) / (0.46 * w)) ** 2 + ((yy - cy) / (0.48 * h)) ** 2)
    face = np.clip((1.0 - r) * min(w, h) * 0.46, 0.0, 1.0)
    texture = 1.0 + 0.04 * np.sin(2 * np.pi * xx / 11.3) * np.cos(2 * np.pi * yy / 9.7)
    skin = np.asarray(config.base_skin_rgb) * texture[..., None]
    still = face[..., None] * skin + (1.0 - face[..., None]) * np.asarray(BACKGROUND)
    t = np.arange(n) / config.fps
    bvp = bvp_waveform(t, config.hr_bpm)
    direction = np.asarray(config.pbv_direction, float)
    direction = direction / np.linalg.norm(direction)
    # pulse lies along ``direction`` in mean-normalized RGB: skin * (1 + A * dir * bvp)
    pulse = config.pulse_amplitude * bvp[:, None] * direction[None, :]
    frames = still[None] + (face[..., None] * skin)[None] * pulse[:, None, None, :]
    return frames, bvp


def inject_specular(video: Video, params: SpecularConfig, seed, centers=None):
    """Blend bright, flickering blobs toward white; returns ``(video, mask)``."""
    frames = video.frames
    n, h, w, _ = frames.shape
    mask = np.zeros((n, h, w), dtype=bool)
    if params.count == 0 or params.intensity == 0:
        return Video(frames.copy(), video.fps), mask
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = rng.uniform([0.2 * w, 0.2 * h], [0.8 * w, 0.8 * h], size=(params.count, 2))
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    out = frames.copy()
    for cx, cy in np.asarray(centers, float)[: params.count]:
        profile = np.clip(params.radius + 0.5 - np.hypot(xx - cx, yy - cy), 0.0, 1.0)
        level = params.intensity * _band_limited(rng, n, video.fps)
        gain = level[:, None, None] * profile[None]
        out = out + gain[..., None] * (1.0 - out)
    mask = (out - frames).max(axis=-1) > MASK_LEVEL
    return Video(out, video.fps), mask


def shadow_edge(n, fps, width, speed):
    """Shadow edge x position over time: bounces between 5% and 35% of the width.

    The shadow stays a partial cast shadow over the left side of the face.
    """
    lo, hi = 0.05 * width, 0.35 * width
    span = hi - lo
    travel = speed * np.arange(n) / fps
    phase = np.mod(travel, 2 * span)
    return lo + np.where(phase < span, phase, 2 * span - phase)


def inject_shadow(video: Video, params: ShadowConfig, seed=None):
    """Darken everything left of a drifting soft edge by ``1 - depth``."""
    frames = video.frames
    n, h, w, _ = frames.shape
    if params.depth == 0:
        return Video(frames.copy(), video.fps), np.zeros((n, h, w), dtype=bool)
    edge = shadow_edge(n, video.fps, w, params.drift_speed)
    xx = np.arange(w) + 0.5
    cover = np.clip((edge[:, None] - xx[None, :]) / 2.0 + 0.5, 0.0, 1.0)  # (T, W)
    factor = 1.0 - params.depth * cover
    out = frames * factor[:, None, :, None]
    mask = np.broadcast_to((1.0 - factor)[:, None, :] > MASK_LEVEL, (n, h, w)).copy()
    return Video(out, video.fps), mask


def inject_jitter(video: Video, sigma_px, seed, masks=()):
    """Translate each frame by an i.i.d. Gaussian sub-pixel offset.

    Returns ``(video, offsets (T, 2) as (dx, dy), shifted masks)``.
    """
    n, h, w, _ = video.frames.shape
    offsets = np.zeros((n, 2))
    if sigma_px == 0:
        return Video(video.frames.copy(), video.fps), offsets, [m.copy() for m in masks]
    rng = np.random.default_rng(seed)
    limit = 0.05 * min(w, h)
    offsets = np.clip(rng.normal(0.0, sigma_px, size=(n, 2)), -limit, limit)
    out = np.empty_like(video.frames)
    shifted = [np.empty(m.shape, dtype=bool) for m in masks]
    for t, (dx, dy) in enumerate(offsets):
        out[t] = nd_shift(video.frames[t], (dy, dx, 0), order=1, mode="nearest")
        for src, dst in zip(masks, shifted):
            dst[t] = nd_shift(src[t].astype(float), (dy, dx), order=1, mode="nearest") > 0.5
    return Video(out, video.fps), offsets, shifted


def inject_sensor_noise(video: Video, sigma, seed):
    if sigma == 0:
        return Video(video.frames.copy(), video.fps)
    rng = np.random.default_rng(seed)
    return Video(np.clip(video.frames + rng.normal(0.0, sigma, size=video.frames.shape), 0.0, 1.0), video.fps)


def _specular_centers(config: SynthConfig, rng):
    polys = roi_polygons(config.width, config.height)
    names = rng.choice(len(SPECULAR_ROIS), size=config.specular.count)
    centers = []
    for k in names:
        poly = polys[SPECULAR_ROIS[k]]
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        centers.append(rng.uniform(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)))
    return np.array(centers).reshape(-1, 2)


def generate_clip(config: SynthConfig) -> Clip:
    """Render a clip; the same config (seed included) gives bit-identical output."""
    config.validate()
    seq = np.random.SeedSequence(config.seed)
    s_layout, s_spec, s_shadow, s_jitter, s_noise = seq.spawn(5)
    frames, bvp = render_base(config)
    video = Video(frames, config.fps)
    video, spec_mask = inject_specular(
        video, config.specular, s_spec, centers=_specular_centers(config, np.random.default_rng(s_layout))
    )
    video, shadow_mask = inject_shadow(video, config.shadow, s_shadow)
    video, offsets, (spec_mask, shadow_mask) = inject_jitter(video, config.jitter_px, s_jitter, (spec_mask, shadow_mask))
    video = inject_sensor_noise(video, config.sensor_noise, s_noise)
    video = Video(quantize(video.frames) / 255.0, config.fps)
    base = roi_polygons(config.width, config.height)
    track = LandmarkTrack([{name: base[name] + offsets[t] for name in ROI_NAMES} for t in range(config.n_frames)])
    truth = GroundTruth(bvp, config.hr_bpm, spec_mask, shadow_mask, offsets)
    return Clip(video, track, truth, config)


def corpus_configs(n=60, seed=0, width=64, height=64, duration_s=20.0):
    """Mixed-corruption configs for the WMST-vs-MST comparison corpus."""
    rng = np.random.default_rng(seed)
    configs = []
    for i in range(n):
        configs.append(
            SynthConfig(
                width=width,
                height=height,
                duration_s=duration_s,
                hr_bpm=float(np.round(rng.uniform(50, 150), 1)),
                specular=SpecularConfig(
                    count=int(rng.integers(1, 4)),
                    radius=float(rng.uniform(3.0, 5.0)),
                    intensity=float(rng.uniform(0.6, 0.9)),
                ),
                shadow=ShadowConfig(depth=float(rng.uniform(0.3, 0.6)), drift_speed=float(rng.uniform(8.0, 20.0))),
                jitter_px=float(rng.uniform(0.0, 0.3)),
                sensor_noise=float(rng.uniform(0.005, 0.02)),
                seed=int(seed * 100003 + i),
            )
        )
    return configs


CLEAN_NOISE = 0.004


def clean_config(hr_bpm, seed=0, **overrides):
    """Uncorrupted clip apart from a ~1 LSB sensor noise floor."""
    overrides.setdefault("sensor_noise", CLEAN_NOISE)
    return replace(SynthConfig(hr_bpm=hr_bpm, seed=seed), **overrides)
