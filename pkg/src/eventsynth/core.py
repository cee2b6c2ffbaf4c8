"""Shared domain types: events, frames, flow fields and generator settings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

# On-disk record layout doubles as the in-memory layout (packed, little-endian).
EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])

DEFAULT_SEED = 0


class ValidationError(ValueError):
    """Raised when a value violates a domain invariant."""


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the algorithm is pinned so draws match across platforms."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sort_events(events: np.ndarray) -> np.ndarray:
    """Sort by t, then y, x, p (all ascending)."""
    order = np.lexsort((events["p"], events["x"], events["y"], events["t"]))
    return events[order]


def empty_events() -> np.ndarray:
    return np.zeros(0, dtype=EVENT_DTYPE)


@dataclass(frozen=True)
class EventStream:
    """Sorted events plus the sensor geometry they belong to."""

    events: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        ev = np.asarray(self.events)
        if ev.dtype != EVENT_DTYPE:
            ev = ev.astype(EVENT_DTYPE)
        ev.flags.writeable = False
        object.__setattr__(self, "events", ev)

    @classmethod
    def from_arrays(cls, x, y, t, p, width: int, height: int, sort: bool = True) -> "EventStream":
        ev = np.zeros(len(t), dtype=EVENT_DTYPE)
        ev["x"], ev["y"], ev["t"], ev["p"] = x, y, t, p
        if sort:
            ev = sort_events(ev)
        return cls(ev, width, height)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def t(self) -> np.ndarray:
        return self.events["t"]

    @property
    def x(self) -> np.ndarray:
        return self.events["x"]

    @property
    def y(self) -> np.ndarray:
        return self.events["y"]

    @property
    def p(self) -> np.ndarray:
        return self.events["p"]

    def validate(self) -> None:
        ev = self.events
        if len(ev) == 0:
            return
        if np.any(ev["x"] >= self.width) or np.any(ev["y"] >= self.height):
            raise ValidationError("event coordinates outside sensor geometry")
        if not np.all(np.isin(ev["p"], (-1, 1))):
            raise ValidationError("polarity must be -1 or +1")
        if not np.array_equal(ev, sort_events(ev)):
            raise ValidationError("events are not sorted by (t, y, x, p)")

    def counts(self) -> tuple[int, int]:
        """Number of positive and negative events."""
        pos = int(np.count_nonzero(self.events["p"] > 0))
        return pos, len(self.events) - pos

    def equals(self, other: "EventStream") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.events, other.events)
        )


def _check_pixels(pixels: np.ndarray) -> np.ndarray:
    arr = np.asarray(pixels, dtype=np.float32)
    if arr.ndim != 2 or arr.size == 0:
        raise ValidationError(f"frame must be a non-empty 2-D array, got shape {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"non-finite pixel at index {idx}")
    out = (arr < 0) | (arr > 1)
    if out.any():
        idx = int(np.flatnonzero(out)[0])
        raise ValidationError(f"pixel {idx} outside [0, 1]: {arr.flat[idx]}")
    return arr


@dataclass(frozen=True)
class Frame:
    """Grayscale intensity image in [0, 1] with a microsecond timestamp."""

    pixels: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        arr = _check_pixels(self.pixels).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)
        object.__setattr__(self, "timestamp", int(self.timestamp))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class FrameSequence:
    """Frames stacked as an (N, H, W) float32 array with strictly increasing timestamps."""

    pixels: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if px.ndim != 3:
            raise ValidationError(f"frame stack must be 3-D, got shape {px.shape}")
        if len(ts) != px.shape[0]:
            raise ValidationError("timestamp count does not match frame count")
        if len(ts) == 0:
            raise ValidationError("sequence has no frames")
        for i in range(px.shape[0]):
            _check_pixels(px[i])
        if np.any(np.diff(ts) <= 0):
            i = int(np.flatnonzero(np.diff(ts) <= 0)[0]) + 1
            raise ValidationError(f"timestamps not strictly increasing at frame {i}")
        if ts[0] < 0:
            raise ValidationError("timestamps must be non-negative")
        px = px.copy()
        ts = ts.copy()
        px.flags.writeable = False
        ts.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_frames(cls, frames: Sequence[Frame]) -> "FrameSequence":
        if not frames:
            raise ValidationError("sequence has no frames")
        shape = frames[0].pixels.shape
        for i, f in enumerate(frames):
            if f.pixels.shape != shape:
                raise ValidationError(f"frame {i} has shape {f.pixels.shape}, expected {shape}")
        return cls(np.stack([f.pixels for f in frames]), [f.timestamp for f in frames])

    def __len__(self) -> int:
        return self.pixels.shape[0]

    def __getitem__(self, i: int) -> Frame:
        return Frame(self.pixels[i], int(self.timestamps[i]))

    def __iter__(self) -> Iterator[Frame]:
        for i in range(len(self)):
            yield self[i]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def select(self, indices) -> "FrameSequence":
        indices = np.asarray(indices)
        return FrameSequence(self.pixels[indices], self.timestamps[indices])


@dataclass(frozen=True)
class FlowField:
    """Bidirectional per-pixel displacement (dx, dy) between two frames.

    ``forward[y, x]`` maps frame i to i+1, ``backward[y, x]`` maps i+1 back to i.
    Both are (H, W, 2) float32 arrays.
    """

    forward: np.ndarray
    backward: np.ndarray

    def __post_init__(self):
        fw = np.asarray(self.forward, dtype=np.float32)
        bw = np.asarray(self.backward, dtype=np.float32)
        if fw.ndim != 3 or fw.shape[2] != 2 or fw.shape != bw.shape:
            raise ValidationError(f"flow planes must be (H, W, 2) and equal, got {fw.shape} / {bw.shape}")
        if not (np.all(np.isfinite(fw)) and np.all(np.isfinite(bw))):
            raise ValidationError("flow contains non-finite values")
        fw, bw = fw.copy(), bw.copy()
        fw.flags.writeable = False
        bw.flags.writeable = False
        object.__setattr__(self, "forward", fw)
        object.__setattr__(self, "backward", bw)

    @classmethod
    def constant(cls, width: int, height: int, dx: float, dy: float) -> "FlowField":
        fw = np.empty((height, width, 2), dtype=np.float32)
        fw[..., 0], fw[..., 1] = dx, dy
        return cls(fw, -fw)

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls.constant(width, height, 0.0, 0.0)

    @property
    def height(self) -> int:
        return self.forward.shape[0]

    @property
    def width(self) -> int:
        return self.forward.shape[1]

    def max_magnitude(self) -> float:
        """Largest Euclidean displacement over both directions and all pixels."""
        fw = np.hypot(self.forward[..., 0].astype(np.float64), self.forward[..., 1])
        bw = np.hypot(self.backward[..., 0].astype(np.float64), self.backward[..., 1])
        return float(max(fw.max(), bw.max()))


@dataclass(frozen=True)
class GeneratorConfig:
    """Settings of the contrast-threshold event generator.

    Parameters
    ----------
    c_pos, c_neg : float
        Positive / negative contrast thresholds in log-intensity units.
    randomize : bool
        Draw both thresholds from U(c_min, c_max) once per sequence.
    refractory_us : int
        Minimum spacing of two events at the same pixel.
    log_eps : float
        Offset added to intensities before the natural log.
    interpolation : {"log", "intensity"}
        Space in which the signal is linearly interpolated between frames.
    """

    c_pos: float = 0.06
    c_neg: float = 0.06
    randomize: bool = False
    c_min: float = 0.05
    c_max: float = 0.5
    refractory_us: int = 0
    log_eps: float = 1e-3
    seed: int = DEFAULT_SEED
    interpolation: str = "log"

    def __post_init__(self):
        if not (self.c_pos > 0 and self.c_neg > 0):
            raise ValidationError("c_pos and c_neg must be > 0")
        if self.randomize and not (0 < self.c_min <= self.c_max):
            raise ValidationError("need 0 < c_min <= c_max when randomize is set")
        if self.refractory_us < 0:
            raise ValidationError("refractory_us must be >= 0")
        if not self.log_eps > 0:
            raise ValidationError("log_eps must be > 0")
        if self.interpolation not in ("log", "intensity"):
            raise ValidationError(f"interpolation must be 'log' or 'intensity', got {self.interpolation!r}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")


def log_intensity(frame: Frame | np.ndarray, log_eps: float = 1e-3) -> np.ndarray:
    """Natural log of ``pixel + log_eps`` as float64, same geometry as the input."""
    px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    px = px.astype(np.float64)
    bad = ~np.isfinite(px)
    if bad.any():
        raise ValidationError(f"non-finite pixel at index {int(np.flatnonzero(bad)[0])}")
    return np.log(px + log_eps)


def sample_thresholds(config: GeneratorConfig, rng: np.random.Generator | None = None) -> tuple[float, float]:
    if not config.randomize:
        return config.c_pos, config.c_neg
    if rng is None:
        rng = make_rng(config.seed)
    c_pos, c_neg = rng.uniform(config.c_min, config.c_max, size=2)
    return float(c_pos), float(c_neg)
