import numpy as np
import pytest

from eventsynth.core import EVENT_DTYPE, EventStream, FrameSequence
from eventsynth.saccade import SaccadeConfig, render_saccade, synthetic_scene

_criteria = {}


@pytest.fixture(scope="session")
def scene():
    return synthetic_scene(240, 180, seed=0)


@pytest.fixture(scope="session")
def saccade_fixture(scene):
    """160 frames of 240x180 at 530 Hz over 300 ms, with exact flows."""
    return render_saccade(scene, SaccadeConfig())


@pytest.fixture
def detail(request):
    """Attach a measured value to the criterion summary line."""
    return lambda text: request.node.user_properties.append(("detail", text))


def make_stream(rows, width=8, height=6):
    """rows: iterable of (x, y, t, p)."""
    ev = np.zeros(len(rows), dtype=EVENT_DTYPE)
    for i, (x, y, t, p) in enumerate(rows):
        ev[i] = (t, x, y, p)
    return EventStream.from_arrays(ev["x"], ev["y"], ev["t"], ev["p"], width, height)


def random_sequence(rng, n_frames=10, height=16, width=16, max_gap=1500):
    pixels = rng.uniform(0.0, 1.0, size=(n_frames, height, width)).astype(np.float32)
    gaps = rng.integers(50, max_gap, size=n_frames - 1)
    stamps = np.concatenate([[int(rng.integers(0, 1000))], gaps]).cumsum()
    return FrameSequence(pixels, stamps)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    details = "; ".join(v for k, v in item.user_properties if k == "detail")
    _criteria[number] = (title, call.excinfo is None, details)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, details = _criteria[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}"
        terminalreporter.write_line(f"{line} ({details})" if details else line)
