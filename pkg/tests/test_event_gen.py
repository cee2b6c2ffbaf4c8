import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eventsynth.core import Frame, FrameSequence, GeneratorConfig, ValidationError
from eventsynth.event_gen import (
    events_from_log,
    generate_events,
    oracle_from_log,
    oracle_generate,
)

from conftest import random_sequence


def _ramp(values, stamps):
    return np.asarray(values, dtype=np.float64).reshape(-1, 1, 1), stamps


def assert_oracle_match(fast, slow):
    """Same (x, y, p) multiset; timestamps within 1 us per pixel and polarity."""
    key = lambda s: Counter(zip(s.x.tolist(), s.y.tolist(), s.p.tolist()))
    assert key(fast) == key(slow)
    for stream in (fast, slow):
        assert np.all(np.diff(stream.t.astype(np.int64)) >= 0)
    order_f = np.lexsort((fast.t, fast.p, fast.x, fast.y))
    order_s = np.lexsort((slow.t, slow.p, slow.x, slow.y))
    dt = fast.t[order_f].astype(np.int64) - slow.t[order_s].astype(np.int64)
    assert np.all(np.abs(dt) <= 1)


def test_ramp_emits_five_events_at_exact_times():
    L, ts = _ramp([0.0, 0.3], [0, 300_000])
    s = events_from_log(L, ts, 0.06, 0.06)
    assert s.t.tolist() == [60_000, 120_000, 180_000, 240_000, 300_000]
    assert s.p.tolist() == [1] * 5


def test_ramp_oracle_within_one_microsecond():
    L, ts = _ramp([0.0, 0.3], [0, 300_000])
    fast = events_from_log(L, ts, 0.06, 0.06)
    slow = oracle_from_log(L, ts, 0.06, 0.06, dt_us=1)
    assert len(slow) == 5
    assert np.all(np.abs(fast.t.astype(np.int64) - slow.t.astype(np.int64)) <= 1)


def test_constant_sequence_is_silent():
    seq = FrameSequence(np.full((5, 4, 4), 0.3), [0, 10, 20, 30, 40])
    cfg = GeneratorConfig()
    assert len(generate_events(seq, cfg)) == 0
    assert len(oracle_generate(seq, cfg)) == 0


def test_step_down_emits_floor_of_change_over_threshold():
    L, ts = _ramp([0.0, -0.13], [0, 1000])
    s = events_from_log(L, ts, 0.06, 0.06)
    assert s.p.tolist() == [-1, -1]
    assert math.floor(0.13 / 0.06) == 2
    # crossings at 0.06/0.13 and 0.12/0.13 of the interval, floored
    assert s.t.tolist() == [math.floor(1000 * 0.06 / 0.13), math.floor(1000 * 0.12 / 0.13)]


def test_no_event_at_first_frame():
    L, ts = _ramp([0.0, 0.0, 0.1], [100, 200, 300])
    s = events_from_log(L, ts, 0.05, 0.05)
    assert s.t.min() > 200


def test_crossing_exactly_at_threshold_fires():
    L, ts = _ramp([1.0, 1.25], [0, 1000])
    s = events_from_log(L, ts, 0.25, 0.25)
    assert s.t.tolist() == [1000]


@settings(max_examples=200, deadline=None)
@given(
    start=st.floats(-5, 1),
    c=st.floats(0.01, 0.6),
    k=st.integers(0, 30),
    frac=st.floats(1e-6, 1 - 1e-6),
    up=st.booleans(),
)
def test_count_law(start, c, k, frac, up):
    delta = (k + frac) * c
    end = start + delta if up else start - delta
    L, ts = _ramp([start, end], [0, 1_000_000])
    s = events_from_log(L, ts, c, c)
    assert len(s) == k
    assert set(s.p.tolist()) <= {1 if up else -1}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_oracle_equivalence_random(seed):
    rng = np.random.default_rng(seed)
    seq = random_sequence(rng, n_frames=6, height=5, width=7)
    cfg = GeneratorConfig(randomize=True, c_min=0.05, c_max=0.5, seed=seed)
    assert_oracle_match(generate_events(seq, cfg), oracle_generate(seq, cfg, dt_us=1))


@pytest.mark.parametrize("seed", range(5))
def test_oracle_equivalence_intensity_space(seed):
    rng = np.random.default_rng(100 + seed)
    seq = random_sequence(rng, n_frames=5, height=6, width=6)
    cfg = GeneratorConfig(c_pos=0.15, c_neg=0.2, interpolation="intensity")
    assert_oracle_match(generate_events(seq, cfg), oracle_generate(seq, cfg, dt_us=1))


def test_interpolation_space_changes_timing_not_counts():
    seq = FrameSequence(np.array([0.1, 0.8]).reshape(2, 1, 1), [0, 10_000])
    log_mode = generate_events(seq, GeneratorConfig(c_pos=0.2))
    lin_mode = generate_events(seq, GeneratorConfig(c_pos=0.2, interpolation="intensity"))
    assert len(log_mode) == len(lin_mode) > 0
    # intensity rises linearly, so its log rises fastest early on
    assert lin_mode.t[0] < log_mode.t[0]


def test_refractory_delays_and_keeps_reference():
    L, ts = _ramp([0.0, 0.3], [0, 300_000])
    s = events_from_log(L, ts, 0.06, 0.06, refractory_us=100_000)
    assert s.t.tolist() == [60_000, 160_000, 260_000]
    slow = oracle_from_log(L, ts, 0.06, 0.06, refractory_us=100_000)
    assert slow.t.tolist() == [60_000, 160_000, 260_000]


def test_refractory_backlog_spills_into_next_interval():
    L, ts = _ramp([0.0, 0.3, 0.3], [0, 300_000, 600_000])
    s = events_from_log(L, ts, 0.06, 0.06, refractory_us=100_000)
    assert s.t.tolist() == [60_000, 160_000, 260_000, 360_000, 460_000]


def test_refractory_zero_is_inert():
    rng = np.random.default_rng(7)
    seq = random_sequence(rng, n_frames=4, height=4, width=4)
    a = generate_events(seq, GeneratorConfig())
    b = generate_events(seq, GeneratorConfig(refractory_us=0))
    assert a.equals(b)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_residual_below_threshold(seed):
    """After the last frame every pixel sits within (-c_neg, c_pos) of its reference."""
    rng = np.random.default_rng(seed)
    L = rng.normal(0, 0.5, size=(6, 3, 4))
    ts = np.arange(6) * 1000
    c_pos, c_neg = 0.07, 0.11
    s = events_from_log(L, ts, c_pos, c_neg)
    ref = L[0].copy()
    np.add.at(ref, (s.y.astype(int), s.x.astype(int)), np.where(s.p > 0, c_pos, -c_neg))
    resid = L[-1] - ref
    assert np.all(resid < c_pos + 1e-9) and np.all(resid > -c_neg - 1e-9)


def test_polarity_levels_move_away_from_reference():
    L, ts = _ramp([0.0, 0.25, -0.2, 0.1], [0, 100, 200, 300])
    s = events_from_log(L, ts, 0.05, 0.05)
    ref = 0.0
    for t, p in zip(s.t.tolist(), s.p.tolist()):
        new = ref + 0.05 * p
        assert (new > ref) == (p > 0)
        ref = new
    assert s.p.tolist() == [1] * 5 + [-1] * 9 + [1] * 6


def test_pixel_independence():
    rng = np.random.default_rng(3)
    seq = random_sequence(rng, n_frames=5, height=4, width=5)
    perm = rng.permutation(20)
    shuffled = FrameSequence(seq.pixels.reshape(5, -1)[:, perm].reshape(5, 4, 5), seq.timestamps)
    cfg = GeneratorConfig(c_pos=0.1, c_neg=0.1)
    a = generate_events(seq, cfg)
    b = generate_events(shuffled, cfg)
    # pixel j of the shuffled sequence holds original pixel perm[j]
    orig_index = perm[b.y.astype(int) * 5 + b.x.astype(int)]
    moved = sorted(zip(b.t.tolist(), (orig_index // 5).tolist(), (orig_index % 5).tolist(), b.p.tolist()))
    assert moved == sorted(zip(a.t.tolist(), a.y.tolist(), a.x.tolist(), a.p.tolist()))


@pytest.mark.parametrize("threads", [2, 3, 7])
def test_thread_count_does_not_change_output(threads):
    rng = np.random.default_rng(11)
    seq = random_sequence(rng, n_frames=8, height=9, width=13)
    cfg = GeneratorConfig(randomize=True, seed=5)
    assert generate_events(seq, cfg, threads=1).events.tobytes() == \
        generate_events(seq, cfg, threads=threads).events.tobytes()


def test_multiple_crossings_in_one_interval_are_time_ordered():
    L, ts = _ramp([0.0, 1.0], [0, 1000])
    s = events_from_log(L, ts, 0.1, 0.1)
    assert len(s) == 10
    assert np.all(np.diff(s.t.astype(np.int64)) > 0)


def test_needs_two_frames():
    with pytest.raises(ValidationError):
        generate_events(FrameSequence(np.zeros((1, 2, 2)), [0]), GeneratorConfig())


def test_oracle_rejects_bad_step():
    seq = FrameSequence(np.zeros((2, 1, 1)), [0, 10])
    with pytest.raises(ValidationError):
        oracle_generate(seq, GeneratorConfig(), dt_us=0)


def test_geometry_is_preserved():
    seq = FrameSequence(np.stack([np.zeros((3, 5)), np.ones((3, 5))]), [0, 1000])
    s = generate_events(seq, GeneratorConfig())
    assert (s.width, s.height) == (5, 3)
    assert set(zip(s.x.tolist(), s.y.tolist())) == {(x, y) for x in range(5) for y in range(3)}
    # ln(1.001) - ln(0.001) spans floor(6.9088 / 0.06) thresholds
    assert len(s) == 15 * math.floor((math.log(1.001) - math.log(0.001)) / 0.06)


def test_frames_from_intensity_match_log_ramp():
    a = 0.4
    b = math.exp(math.log(a + 1e-3) + 0.33) - 1e-3
    seq = FrameSequence.from_frames([Frame(np.full((1, 1), a), 0), Frame(np.full((1, 1), b), 330_000)])
    s = generate_events(seq, GeneratorConfig(c_pos=0.06))
    assert len(s) == 5
    assert np.all(np.abs(s.t.astype(np.int64) - np.arange(1, 6) * 60_000) <= 2)
