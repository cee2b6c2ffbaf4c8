"""Dense tensors from event windows: Event Spike Tensor and 6-channel maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EVENT_DTYPE, EventStream, ValidationError

EST = "est"
SIX_CHANNEL = "six"


@dataclass(frozen=True)
class EventWindow:
    events: np.ndarray
    t_start: int
    t_end: int
    width: int
    height: int

    def __post_init__(self):
        ev = np.asarray(self.events)
        if ev.dtype != EVENT_DTYPE:
            ev = ev.astype(EVENT_DTYPE)
        object.__setattr__(self, "events", ev)
        if not self.t_start < self.t_end:
            raise ValidationError(f"window start {self.t_start} must precede end {self.t_end}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("window geometry must be positive")
        if len(ev):
            t = ev["t"].astype(np.int64)
            if t.min() < self.t_start or t.max() > self.t_end:
                raise ValidationError("event outside window bounds")
            if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
                raise ValidationError("event coordinates outside window geometry")

    def normalized_times(self) -> np.ndarray:
        t = self.events["t"].astype(np.float64)
        return (t - self.t_start) / (self.t_end - self.t_start)


@dataclass(frozen=True)
class EventTensor:
    """(channels, height, width) float32 grid.

    EST layout: ``bins`` positive channels followed by ``bins`` negative ones.
    Six-channel layout: count, mean time, std time for positive, then negative.
    """

    data: np.ndarray
    kind: str

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def positive(self) -> np.ndarray:
        return self.data[: self.channels // 2]

    @property
    def negative(self) -> np.ndarray:
        return self.data[self.channels // 2:]


def build_est(window: EventWindow, bins: int = 15) -> EventTensor:
    """Vote each event into its two nearest temporal bins with linear weights."""
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    grid = np.zeros((2, bins, window.height, window.width), dtype=np.float64)
    ev = window.events
    if len(ev):
        tn = window.normalized_times() * (bins - 1)
        lo = np.floor(tn).astype(np.int64)
        w_hi = tn - lo
        hi = np.minimum(lo + 1, bins - 1)
        half = (ev["p"] < 0).astype(np.int64)
        y = ev["y"].astype(np.int64)
        x = ev["x"].astype(np.int64)
        np.add.at(grid, (half, lo, y, x), 1.0 - w_hi)
        # w_hi is 0 whenever lo is the last bin, so clamping hi moves no mass
        np.add.at(grid, (half, hi, y, x), w_hi)
    return EventTensor(grid.reshape(2 * bins, window.height, window.width).astype(np.float32), EST)


def build_six_channel(window: EventWindow) -> EventTensor:
    """Per polarity: event count, mean and population std of normalized timestamps."""
    h, w = window.height, window.width
    out = np.zeros((6, h, w), dtype=np.float64)
    ev = window.events
    tn = window.normalized_times()
    for k, sign in enumerate((1, -1)):
        sel = ev["p"] == sign
        if not sel.any():
            continue
        y = ev["y"][sel].astype(np.int64)
        x = ev["x"][sel].astype(np.int64)
        t = tn[sel]
        count = np.zeros((h, w))
        total = np.zeros((h, w))
        np.add.at(count, (y, x), 1.0)
        np.add.at(total, (y, x), t)
        mean = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
        sq = np.zeros((h, w))
        np.add.at(sq, (y, x), (t - mean[y, x]) ** 2)
        std = np.sqrt(np.divide(sq, count, out=np.zeros_like(sq), where=count > 1))
        out[3 * k] = count
        out[3 * k + 1] = mean
        out[3 * k + 2] = std
    return EventTensor(out.astype(np.float32), SIX_CHANNEL)


def slice_windows(stream: EventStream, labels: Sequence[int], window_us: int) -> list[EventWindow]:
    """One window per label over ``(label - window_us, label]``."""
    if window_us <= 0:
        raise ValidationError("window_us must be > 0")
    labels = [int(v) for v in labels]
    if any(b < a for a, b in zip(labels, labels[1:])):
        raise ValidationError("labels must be sorted")
    t = stream.t.astype(np.int64)
    windows = []
    for label in labels:
        start = label - window_us
        lo = np.searchsorted(t, start, side="right")
        hi = np.searchsorted(t, label, side="right")
        windows.append(EventWindow(stream.events[lo:hi], start, label, stream.width, stream.height))
    return windows
