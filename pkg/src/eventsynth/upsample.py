"""Adaptive temporal upsampling of frame sequences.

The number of intermediate frames per pair is chosen from the largest optical
flow magnitude so that consecutive frames move by at most one pixel. Frames are
synthesized either by cross-fading or by flow-based backward warping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Frame, FrameSequence, FlowField, ValidationError

CROSSFADE = "crossfade"
FLOW_WARP = "flow_warp"


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                    fill: float | None = None) -> np.ndarray:
    """Sample ``image`` at real-valued coordinates.

    With ``fill=None`` coordinates are clamped to the image border. Otherwise
    neighbours outside the image contribute ``fill``.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if fill is None:
        xs = np.clip(xs, 0, w - 1)
        ys = np.clip(ys, 0, h - 1)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        if fill is None:
            return vals
        return np.where(inside, vals, fill)

    return ((1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1))
            + fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1)))


def warp(image: np.ndarray, flow: np.ndarray, scale: float = 1.0,
         fill: float | None = None) -> np.ndarray:
    """Backward-warp: ``out(u) = image(u + scale * flow(u))``."""
    h, w = image.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return bilinear_sample(image, xs + scale * flow[..., 0], ys + scale * flow[..., 1], fill)


@dataclass(frozen=True)
class UpsamplePlan:
    counts: tuple[int, ...]
    timestamps: tuple[tuple[int, ...], ...]

    def total_frames(self, n_original: int) -> int:
        return n_original + sum(self.counts)


def _intermediate_times(t0: int, t1: int, k: int) -> tuple[int, ...]:
    span = t1 - t0
    return tuple(t0 + (j * span) // (k + 1) for j in range(1, k + 1))


def intermediate_count(max_displacement: float) -> int:
    """Frames to insert so that each step moves at most one pixel."""
    return max(0, math.ceil(max_displacement - 1.0))


def _check_flows(seq: FrameSequence, flows: Sequence[FlowField]) -> None:
    if len(flows) != len(seq) - 1:
        raise ValidationError(f"expected {len(seq) - 1} flow fields, got {len(flows)}")
    for i, fl in enumerate(flows):
        if (fl.width, fl.height) != (seq.width, seq.height):
            raise ValidationError(
                f"flow {i} is {fl.width}x{fl.height}, sequence is {seq.width}x{seq.height}")


def _plan_from_counts(seq: FrameSequence, counts: Sequence[int]) -> UpsamplePlan:
    counts = list(counts)
    times = []
    for i, k in enumerate(counts):
        t0, t1 = int(seq.timestamps[i]), int(seq.timestamps[i + 1])
        if k > t1 - t0 - 1:
            raise ValidationError(
                f"pair {i}: {k} intermediate frames do not fit in {t1 - t0} us at 1 us resolution")
        times.append(_intermediate_times(t0, t1, k))
    return UpsamplePlan(tuple(counts), tuple(times))


def plan_upsampling(seq: FrameSequence, flows: Sequence[FlowField]) -> UpsamplePlan:
    _check_flows(seq, flows)
    return _plan_from_counts(seq, [intermediate_count(fl.max_magnitude()) for fl in flows])


def plan_uniform(seq: FrameSequence, factor: int) -> UpsamplePlan:
    """Insert ``factor - 1`` frames in every pair."""
    if factor < 1:
        raise ValidationError("upsample factor must be >= 1")
    return _plan_from_counts(seq, [factor - 1] * (len(seq) - 1))


def _same_geometry(a: Frame, b: Frame) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValidationError(f"frame shapes differ: {a.pixels.shape} vs {b.pixels.shape}")


def _blend_time(f_a: Frame, f_b: Frame, alpha: float, timestamp: int | None) -> int:
    if timestamp is not None:
        return int(timestamp)
    return int(math.floor(f_a.timestamp + alpha * (f_b.timestamp - f_a.timestamp)))


def interpolate_crossfade(f_a: Frame, f_b: Frame, alpha: float,
                          timestamp: int | None = None) -> Frame:
    """Per-pixel linear blend ``(1 - alpha) * f_a + alpha * f_b``."""
    _same_geometry(f_a, f_b)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    a = f_a.pixels.astype(np.float64)
    b = f_b.pixels.astype(np.float64)
    out = np.clip((1.0 - alpha) * a + alpha * b, 0.0, 1.0)
    return Frame(out.astype(np.float32), _blend_time(f_a, f_b, alpha, timestamp))


def interpolate_flow_warp(f_a: Frame, f_b: Frame, flow: FlowField, alpha: float,
                          timestamp: int | None = None) -> Frame:
    """Blend of both frames, each backward-warped to time ``alpha``.

    ``f_a`` is sampled at ``u - alpha * forward(u)`` and ``f_b`` at
    ``u - (1 - alpha) * backward(u)``; borders are clamped.
    """
    _same_geometry(f_a, f_b)
    if (flow.width, flow.height) != (f_a.width, f_a.height):
        raise ValidationError("flow geometry does not match frames")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    from_a = warp(f_a.pixels, flow.forward, -alpha)
    from_b = warp(f_b.pixels, flow.backward, -(1.0 - alpha))
    out = np.clip((1.0 - alpha) * from_a + alpha * from_b, 0.0, 1.0)
    return Frame(out.astype(np.float32), _blend_time(f_a, f_b, alpha, timestamp))


Interpolator = Callable[[Frame, Frame, "FlowField | None", float, int], Frame]


def _resolve(interpolator) -> Interpolator:
    if callable(interpolator):
        return interpolator
    if interpolator == CROSSFADE:
        return lambda a, b, flow, alpha, t: interpolate_crossfade(a, b, alpha, t)
    if interpolator in (FLOW_WARP, "flowwarp"):
        def fw(a, b, flow, alpha, t):
            if flow is None:
                raise ValidationError("flow_warp interpolation needs flow fields")
            return interpolate_flow_warp(a, b, flow, alpha, t)
        return fw
    raise ValidationError(f"unknown interpolator {interpolator!r}")


def upsample_sequence(seq: FrameSequence, flows: Sequence[FlowField] | None,
                      interpolator=CROSSFADE, plan: UpsamplePlan | None = None) -> FrameSequence:
    """Insert interpolated frames between every pair.

    The plan defaults to :func:`plan_upsampling` on ``flows``. Original frames
    are kept bit-exact at their timestamps.
    """
    if plan is None:
        if flows is None:
            raise ValidationError("either flows or an explicit plan is required")
        plan = plan_upsampling(seq, flows)
    elif flows is not None:
        _check_flows(seq, flows)
    if len(plan.counts) != len(seq) - 1:
        raise ValidationError("plan does not match sequence length")
    if sum(plan.counts) == 0:
        return seq
    interp = _resolve(interpolator)

    n_out = plan.total_frames(len(seq))
    pixels = np.empty((n_out, seq.height, seq.width), dtype=np.float32)
    stamps = np.empty(n_out, dtype=np.int64)
    k = 0
    for i in range(len(seq) - 1):
        f_a, f_b = seq[i], seq[i + 1]
        pixels[k], stamps[k] = seq.pixels[i], seq.timestamps[i]
        k += 1
        span = f_b.timestamp - f_a.timestamp
        for t in plan.timestamps[i]:
            alpha = (t - f_a.timestamp) / span
            f = interp(f_a, f_b, flows[i] if flows is not None else None, alpha, t)
            pixels[k], stamps[k] = f.pixels, t
            k += 1
    pixels[k], stamps[k] = seq.pixels[-1], seq.timestamps[-1]
    return FrameSequence(pixels, stamps)


def downsample_sequence(seq: FrameSequence, factor: int) -> FrameSequence:
    """Keep every ``factor``-th frame plus the last one."""
    return seq.select(downsample_indices(len(seq), factor))


def downsample_indices(n: int, factor: int) -> np.ndarray:
    if factor < 1:
        raise ValidationError("downsample factor must be >= 1")
    idx = list(range(0, n, factor))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return np.asarray(idx)


def _is_constant(flow: FlowField) -> bool:
    return bool(np.all(flow.forward == flow.forward[0, 0]) and np.all(flow.backward == flow.backward[0, 0]))


def compose_flows(first: FlowField, second: FlowField) -> FlowField:
    """Flow across two consecutive pairs (a->b then b->c gives a->c).

    Exact for constant (translational) fields, a bilinear approximation otherwise.
    """
    if _is_constant(first) and _is_constant(second):
        return FlowField(first.forward.astype(np.float64) + second.forward,
                         second.backward.astype(np.float64) + first.backward)
    fw = np.empty_like(first.forward, dtype=np.float64)
    bw = np.empty_like(first.backward, dtype=np.float64)
    for c in range(2):
        fw[..., c] = first.forward[..., c] + warp(second.forward[..., c], first.forward)
        bw[..., c] = second.backward[..., c] + warp(first.backward[..., c], second.backward)
    return FlowField(fw, bw)


def downsample_flows(flows: Sequence[FlowField], n_frames: int, factor: int) -> list[FlowField]:
    """Flows matching :func:`downsample_sequence` with the same factor."""
    if len(flows) != n_frames - 1:
        raise ValidationError(f"expected {n_frames - 1} flow fields, got {len(flows)}")
    idx = downsample_indices(n_frames, factor)
    out = []
    for a, b in zip(idx[:-1], idx[1:]):
        acc = flows[a]
        for k in range(a + 1, b):
            acc = compose_flows(acc, flows[k])
        out.append(acc)
    return out
