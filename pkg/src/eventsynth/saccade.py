"""Render a moving-camera frame sequence from a still image.

A virtual camera translates over the image plane along a closed triangle (three
saccades). Motion is a pure translation, so exact flow fields come for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Frame, FlowField, FrameSequence, ValidationError
from .upsample import bilinear_sample

DEFAULT_TRIANGLE = ((0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2))


@dataclass(frozen=True)
class SaccadeConfig:
    """Camera path settings.

    ``amplitude_px`` scales the unit triangle ``vertices``. The default of 7 px
    moves the camera about 0.13 px per frame at 530 Hz over 300 ms.
    ``fill_value=None`` fills out-of-image samples with the image mean.
    """

    duration_us: int = 300_000
    fps_hz: float = 530.0
    amplitude_px: float = 7.0
    vertices: tuple = DEFAULT_TRIANGLE
    fill_value: float | None = None

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ValidationError("duration_us must be > 0")
        if not self.fps_hz > 0:
            raise ValidationError("fps_hz must be > 0")
        if not self.amplitude_px >= 0:
            raise ValidationError("amplitude_px must be >= 0")
        if len(self.vertices) != 3:
            raise ValidationError("saccade path needs exactly three vertices")
        if self.fill_value is not None and not 0.0 <= self.fill_value <= 1.0:
            raise ValidationError("fill_value must lie in [0, 1]")


def frame_timestamps(config: SaccadeConfig) -> np.ndarray:
    """Integer microsecond render times covering [0, duration]."""
    period = 1e6 / config.fps_hz
    n = int(math.floor(config.duration_us / period + 1e-9)) + 1
    return np.array([int(math.floor(i * period + 1e-6)) for i in range(n)], dtype=np.int64)


def camera_offset(t_us: float, config: SaccadeConfig) -> tuple[float, float]:
    """Camera position at ``t_us``: arc-length parametrized closed triangle."""
    verts = np.asarray(config.vertices, dtype=np.float64) * config.amplitude_px
    s = min(max(t_us / config.duration_us, 0.0), 1.0)
    lengths = [float(np.hypot(*(verts[(k + 1) % 3] - verts[k]))) for k in range(3)]
    dist = s * sum(lengths)
    for k, length in enumerate(lengths):
        if length > 0 and dist <= length:
            p = verts[k] + (dist / length) * (verts[(k + 1) % 3] - verts[k])
            return float(p[0]), float(p[1])
        dist -= length
    return float(verts[0][0]), float(verts[0][1])


def render_saccade(image: Frame | np.ndarray, config: SaccadeConfig = SaccadeConfig()
                   ) -> tuple[FrameSequence, list[FlowField]]:
    """Render frames and the exact per-pair flows.

    Frame at time t is ``image(u + offset(t))``. Content therefore moves by
    ``offset(t_i) - offset(t_{i+1})`` from frame i to i+1.
    """
    img = image.pixels if isinstance(image, Frame) else np.asarray(image, dtype=np.float32)
    if img.ndim != 2 or img.size == 0:
        raise ValidationError("saccade input must be a non-empty 2-D image")
    img = Frame(img).pixels
    h, w = img.shape
    fill = float(img.mean()) if config.fill_value is None else config.fill_value
    stamps = frame_timestamps(config)
    offsets = [camera_offset(float(t), config) for t in stamps]

    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    frames = np.empty((len(stamps), h, w), dtype=np.float32)
    for i, (ox, oy) in enumerate(offsets):
        frames[i] = np.clip(bilinear_sample(img, xs + ox, ys + oy, fill), 0.0, 1.0)

    flows = []
    for (ax, ay), (bx, by) in zip(offsets[:-1], offsets[1:]):
        flows.append(FlowField.constant(w, h, ax - bx, ay - by))
    return FrameSequence(frames, stamps), flows


def synthetic_scene(width: int = 240, height: int = 180, seed: int = 0) -> np.ndarray:
    """Smooth textured test image in [0.05, 0.95]: random Gaussian blobs and gratings."""
    rng = np.random.Generator(np.random.PCG64(seed))
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width))
    for _ in range(24):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        sigma = rng.uniform(4, 20)
        img += rng.uniform(-1, 1) * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma**2))
    for _ in range(3):
        theta = rng.uniform(0, np.pi)
        period = rng.uniform(12, 40)
        img += 0.3 * np.sin(2 * np.pi * (xs * np.cos(theta) + ys * np.sin(theta)) / period
                            + rng.uniform(0, 2 * np.pi))
    img -= img.min()
    img /= img.max()
    return (0.05 + 0.9 * img).astype(np.float32)
