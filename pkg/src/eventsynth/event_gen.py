"""Contrast-threshold event generation from a frame sequence.

Each pixel keeps a reference log intensity. Between two frames the log signal is
treated as linear in time (or, optionally, the intensity is), and every time it
moves ``c_pos`` above or ``c_neg`` below the reference an event is emitted at
the crossing time and the reference jumps to the crossed level.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from .core import (
    EVENT_DTYPE,
    EventStream,
    FrameSequence,
    GeneratorConfig,
    ValidationError,
    sample_thresholds,
    sort_events,
)

logger = logging.getLogger(__name__)

# Absorbs rounding when a signal lands exactly on a threshold level (>= semantics).
LEVEL_TOL = 1e-9
# Crossing times this close below an integer microsecond snap up to it before flooring.
TIME_TOL = 1e-6


@njit(cache=True, nogil=True)
def _crossing_time(la, lb, ia, ib, level, t0, t1, intensity, eps):
    if intensity:
        frac = (math.exp(level) - eps - ia) / (ib - ia)
    else:
        frac = (level - la) / (lb - la)
    if frac < 0.0:
        frac = 0.0
    elif frac > 1.0:
        frac = 1.0
    return t0 + frac * (t1 - t0)


@njit(cache=True, nogil=True)
def _value_at(la, lb, ia, ib, t, t0, t1, intensity, eps):
    frac = (t - t0) / (t1 - t0)
    if intensity:
        return math.log(ia + frac * (ib - ia) + eps)
    return la + frac * (lb - la)


@njit(cache=True, nogil=True)
def _simulate(L, I, ts, p0, p1, width, c_pos, c_neg, refr, intensity, eps,
              emit, out_t, out_x, out_y, out_p):
    n = 0
    nframes = L.shape[0]
    for j in range(p0, p1):
        ref = L[0, j]
        last = -1
        for i in range(nframes - 1):
            t0 = float(ts[i])
            t1 = float(ts[i + 1])
            la = L[i, j]
            lb = L[i + 1, j]
            ia = I[i, j]
            ib = I[i + 1, j]
            # the signal is only examined on [cur, t1]; cur advances with each event
            cur = t0
            lcur = la
            while True:
                up = ref + c_pos
                dn = ref - c_neg
                a_up = lcur >= up - LEVEL_TOL
                b_up = lb >= up - LEVEL_TOL
                a_dn = lcur <= dn + LEVEL_TOL
                b_dn = lb <= dn + LEVEL_TOL
                if a_up or b_up:
                    level = up
                    pol = 1
                    a_hit, b_hit = a_up, b_up
                elif a_dn or b_dn:
                    level = dn
                    pol = -1
                    a_hit, b_hit = a_dn, b_dn
                else:
                    break
                # [start, end]: part of [cur, t1] where the level is reached
                if a_hit and b_hit:
                    start, end = cur, t1
                elif b_hit:
                    start = max(cur, _crossing_time(la, lb, ia, ib, level, t0, t1, intensity, eps))
                    end = t1
                else:
                    start = cur
                    end = _crossing_time(la, lb, ia, ib, level, t0, t1, intensity, eps)
                tau = start
                if last >= 0 and last + refr > tau:
                    tau = float(last + refr)
                if tau > end:
                    break  # suppressed by the refractory period; reference stays
                te = int(math.floor(tau + TIME_TOL))
                if te > ts[i + 1]:
                    te = ts[i + 1]
                if emit:
                    out_t[n] = te
                    out_x[n] = j % width
                    out_y[n] = j // width
                    out_p[n] = pol
                n += 1
                ref = level
                last = te
                cur = tau
                lcur = _value_at(la, lb, ia, ib, tau, t0, t1, intensity, eps)
    return n


@njit(cache=True, nogil=True)
def _oracle(L, I, ts, width, c_pos, c_neg, refr, intensity, eps, dt,
            emit, out_t, out_x, out_y, out_p):
    n = 0
    npix = L.shape[1]
    t_end = ts[ts.shape[0] - 1]
    for j in range(npix):
        ref = L[0, j]
        last = -1
        i = 0
        s = ts[0] + dt
        while s <= t_end:
            while ts[i + 1] < s:
                i += 1
            frac = (s - ts[i]) / (ts[i + 1] - ts[i])
            if intensity:
                ls = math.log(I[i, j] + frac * (I[i + 1, j] - I[i, j]) + eps)
            else:
                ls = L[i, j] + frac * (L[i + 1, j] - L[i, j])
            while last < 0 or s - last >= refr:
                if ls >= ref + c_pos - LEVEL_TOL:
                    pol = 1
                    ref += c_pos
                elif ls <= ref - c_neg + LEVEL_TOL:
                    pol = -1
                    ref -= c_neg
                else:
                    break
                if emit:
                    out_t[n] = s
                    out_x[n] = j % width
                    out_y[n] = j // width
                    out_p[n] = pol
                n += 1
                last = s
            s += dt
    return n


def _run_two_pass(kernel, args_before, args_after):
    """Count events, allocate, then fill. Returns a structured event array."""
    dummy_t = np.zeros(0, np.int64)
    dummy_c = np.zeros(0, np.uint16)
    dummy_p = np.zeros(0, np.int8)
    n = kernel(*args_before, *args_after, False, dummy_t, dummy_c, dummy_c, dummy_p)
    out_t = np.empty(n, np.int64)
    out_x = np.empty(n, np.uint16)
    out_y = np.empty(n, np.uint16)
    out_p = np.empty(n, np.int8)
    kernel(*args_before, *args_after, True, out_t, out_x, out_y, out_p)
    ev = np.empty(n, dtype=EVENT_DTYPE)
    ev["t"], ev["x"], ev["y"], ev["p"] = out_t, out_x, out_y, out_p
    return ev


def _prepare(seq: FrameSequence, config: GeneratorConfig):
    if len(seq) < 2:
        raise ValidationError("event generation needs at least 2 frames")
    n = len(seq)
    intensities = seq.pixels.reshape(n, -1).astype(np.float64)
    logs = np.log(intensities + config.log_eps)
    return logs, intensities, np.ascontiguousarray(seq.timestamps, dtype=np.int64)


def _simulate_chunked(L, I, ts, width, c_pos, c_neg, refr, intensity, eps, threads):
    npix = L.shape[1]
    threads = max(1, min(int(threads), npix))
    bounds = np.linspace(0, npix, threads + 1).astype(np.int64)

    def job(k):
        return _run_two_pass(
            _simulate,
            (L, I, ts, int(bounds[k]), int(bounds[k + 1]), width),
            (float(c_pos), float(c_neg), int(refr), intensity, float(eps)),
        )

    if threads == 1:
        parts = [job(0)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(threads)))
    return sort_events(np.concatenate(parts))


def events_from_log(log_frames, timestamps, c_pos: float, c_neg: float,
                    refractory_us: int = 0, threads: int = 1) -> EventStream:
    """Run the generator directly on (N, H, W) log-intensity frames.

    Useful when the log signal itself is the quantity of interest, e.g. analytic
    ramps that do not correspond to an intensity in [0, 1].
    """
    L = np.asarray(log_frames, dtype=np.float64)
    ts = np.asarray(timestamps, dtype=np.int64)
    if L.ndim != 3 or L.shape[0] != len(ts):
        raise ValidationError("log frames must be (N, H, W) with one timestamp per frame")
    if len(ts) < 2:
        raise ValidationError("event generation needs at least 2 frames")
    if np.any(np.diff(ts) <= 0):
        raise ValidationError("timestamps not strictly increasing")
    if not np.all(np.isfinite(L)):
        raise ValidationError("log frames contain non-finite values")
    n, h, w = L.shape
    flat = np.ascontiguousarray(L.reshape(n, -1))
    ev = _simulate_chunked(flat, flat, ts, w, c_pos, c_neg, refractory_us, False, 0.0, threads)
    return EventStream(ev, w, h)


def generate_events(seq: FrameSequence, config: GeneratorConfig, threads: int = 1,
                    thresholds: tuple[float, float] | None = None) -> EventStream:
    """Convert a frame sequence into a sorted event stream.

    Thresholds are drawn once per sequence from ``config`` unless ``thresholds``
    is given explicitly. The output does not depend on ``threads``.
    """
    c_pos, c_neg = thresholds if thresholds is not None else sample_thresholds(config)
    L, I, ts = _prepare(seq, config)
    ev = _simulate_chunked(L, I, ts, seq.width, c_pos, c_neg, config.refractory_us,
                           config.interpolation == "intensity", config.log_eps, threads)
    logger.debug("generated %d events with c_pos=%.4f c_neg=%.4f", len(ev), c_pos, c_neg)
    return EventStream(ev, seq.width, seq.height)


def oracle_generate(seq: FrameSequence, config: GeneratorConfig, dt_us: int = 1,
                    thresholds: tuple[float, float] | None = None) -> EventStream:
    """Brute-force reference: sample the interpolated signal every ``dt_us`` and
    apply the threshold test sample by sample."""
    if dt_us < 1:
        raise ValidationError("dt_us must be >= 1")
    c_pos, c_neg = thresholds if thresholds is not None else sample_thresholds(config)
    L, I, ts = _prepare(seq, config)
    ev = _run_two_pass(
        _oracle,
        (L, I, ts, seq.width),
        (float(c_pos), float(c_neg), int(config.refractory_us),
         config.interpolation == "intensity", float(config.log_eps), int(dt_us)),
    )
    return EventStream(sort_events(ev), seq.width, seq.height)


def oracle_from_log(log_frames, timestamps, c_pos: float, c_neg: float,
                    refractory_us: int = 0, dt_us: int = 1) -> EventStream:
    L = np.asarray(log_frames, dtype=np.float64)
    ts = np.asarray(timestamps, dtype=np.int64)
    n, h, w = L.shape
    flat = np.ascontiguousarray(L.reshape(n, -1))
    ev = _run_two_pass(
        _oracle,
        (flat, flat, ts, w),
        (float(c_pos), float(c_neg), int(refractory_us), False, 0.0, int(dt_us)),
    )
    return EventStream(sort_events(ev), w, h)
