"""File formats: event streams, flow fields, tensors, PGM frames and manifests.

All binary formats are little-endian. See docs/FORMATS.md for byte layouts.
"""

from __future__ import annotations

import struct
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from .core import EVENT_DTYPE, EventStream, FlowField, FrameSequence, ValidationError, sort_events
from .representation import EST, SIX_CHANNEL, EventTensor

EVENT_MAGIC = b"EVT1"
EVENT_VERSION = 1
EVENT_HEADER = struct.Struct("<4sHHHQ")

FLOW_MAGIC = b"FLO1"
FLOW_HEADER = struct.Struct("<4sHH")

TENSOR_MAGIC = b"TNS1"
TENSOR_HEADER = struct.Struct("<4sHHHH")
TENSOR_KINDS = {EST: 0, SIX_CHANNEL: 1}


class FileFormatError(ValidationError):
    """Malformed or truncated file contents."""

    category = "format"


class BoundsError(ValidationError):
    """Coordinates or geometry outside the declared limits."""

    category = "bounds"


class OrderingError(ValidationError):
    """Records or timestamps out of order."""

    category = "ordering"


def _u16(value: int, what: str) -> int:
    if not 0 <= value <= 0xFFFF:
        raise BoundsError(f"{what} {value} does not fit in 16 bits")
    return value


# --- events -----------------------------------------------------------------

def encode_events(stream: EventStream) -> bytes:
    ev = stream.events
    if len(ev):
        if ev["x"].max() >= stream.width or ev["y"].max() >= stream.height:
            raise BoundsError("event coordinates outside sensor geometry")
        if not np.array_equal(ev, sort_events(ev)):
            raise OrderingError("events must be sorted by (t, y, x, p) before writing")
    header = EVENT_HEADER.pack(EVENT_MAGIC, EVENT_VERSION, _u16(stream.width, "width"),
                               _u16(stream.height, "height"), len(ev))
    return header + ev.astype(EVENT_DTYPE).tobytes()


def decode_events(data: bytes) -> EventStream:
    if len(data) < EVENT_HEADER.size:
        raise FileFormatError("event file truncated inside header")
    magic, version, width, height, count = EVENT_HEADER.unpack_from(data)
    if magic != EVENT_MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {EVENT_MAGIC!r}")
    if version != EVENT_VERSION:
        raise FileFormatError(f"unsupported event file version {version}")
    expected = EVENT_HEADER.size + count * EVENT_DTYPE.itemsize
    if len(data) < expected:
        raise FileFormatError(f"event file truncated: header declares {count} events")
    if len(data) > expected:
        raise FileFormatError(f"{len(data) - expected} trailing bytes after last event")
    ev = np.frombuffer(data, dtype=EVENT_DTYPE, count=count, offset=EVENT_HEADER.size).copy()
    if count:
        if not np.all((ev["p"] == 1) | (ev["p"] == -1)):
            raise FileFormatError("polarity must be +1 or -1")
        if ev["x"].max() >= width or ev["y"].max() >= height:
            raise BoundsError(f"event coordinates outside {width}x{height}")
        if not np.array_equal(ev, sort_events(ev)):
            raise OrderingError("events are not sorted by (t, y, x, p)")
    return EventStream(ev, width, height)


def write_events(path, stream: EventStream) -> None:
    Path(path).write_bytes(encode_events(stream))


def read_events(path) -> EventStream:
    return decode_events(Path(path).read_bytes())


# --- flow -------------------------------------------------------------------

def encode_flow(flow: FlowField) -> bytes:
    h, w = flow.height, flow.width
    planes = np.stack([flow.forward[..., 0], flow.forward[..., 1],
                       flow.backward[..., 0], flow.backward[..., 1]]).astype("<f4")
    return FLOW_HEADER.pack(FLOW_MAGIC, _u16(w, "width"), _u16(h, "height")) + planes.tobytes()


def decode_flow(data: bytes) -> FlowField:
    if len(data) < FLOW_HEADER.size:
        raise FileFormatError("flow file truncated inside header")
    magic, w, h = FLOW_HEADER.unpack_from(data)
    if magic != FLOW_MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {FLOW_MAGIC!r}")
    expected = FLOW_HEADER.size + 4 * w * h * 4
    if len(data) != expected:
        raise FileFormatError(f"flow file is {len(data)} bytes, header implies {expected}")
    planes = np.frombuffer(data, dtype="<f4", offset=FLOW_HEADER.size).reshape(4, h, w)
    if not np.all(np.isfinite(planes)):
        raise FileFormatError("flow file contains non-finite values")
    return FlowField(np.stack([planes[0], planes[1]], axis=-1),
                     np.stack([planes[2], planes[3]], axis=-1))


def write_flow(path, flow: FlowField) -> None:
    Path(path).write_bytes(encode_flow(flow))


def read_flow(path) -> FlowField:
    return decode_flow(Path(path).read_bytes())


def read_flow_dir(directory) -> list[FlowField]:
    """All ``*.flo`` files of a directory in name order."""
    files = sorted(Path(directory).glob("*.flo"))
    return [read_flow(f) for f in files]


# --- tensors ----------------------------------------------------------------

def encode_tensor(tensor: EventTensor) -> bytes:
    c, h, w = tensor.data.shape
    header = TENSOR_HEADER.pack(TENSOR_MAGIC, TENSOR_KINDS[tensor.kind], _u16(c, "channels"),
                                _u16(h, "height"), _u16(w, "width"))
    return header + np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()


def decode_tensor(data: bytes) -> EventTensor:
    if len(data) < TENSOR_HEADER.size:
        raise FileFormatError("tensor file truncated inside header")
    magic, kind, c, h, w = TENSOR_HEADER.unpack_from(data)
    if magic != TENSOR_MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    names = {v: k for k, v in TENSOR_KINDS.items()}
    if kind not in names:
        raise FileFormatError(f"unknown tensor kind {kind}")
    expected = TENSOR_HEADER.size + 4 * c * h * w
    if len(data) != expected:
        raise FileFormatError(f"tensor file is {len(data)} bytes, header implies {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=TENSOR_HEADER.size).reshape(c, h, w)
    return EventTensor(arr.astype(np.float32), names[kind])


def write_tensor(path, tensor: EventTensor) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def read_tensor(path) -> EventTensor:
    return decode_tensor(Path(path).read_bytes())


# --- PGM frames and manifests ---------------------------------------------------

def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FileFormatError("PGM header truncated")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Binary (P5) 8-bit PGM to a uint8 (H, W) array."""
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise FileFormatError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FileFormatError("PGM header has non-integer fields") from exc
    if w <= 0 or h <= 0:
        raise FileFormatError("PGM has zero size")
    if not 0 < maxval <= 255:
        raise FileFormatError(f"only 8-bit PGM is supported (maxval {maxval})")
    raster = data[offset:offset + w * h]
    if len(raster) != w * h:
        raise FileFormatError("PGM raster truncated")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    if maxval != 255:
        img = np.round(img.astype(np.float64) * 255.0 / maxval).astype(np.uint8)
    return img


def encode_pgm(image: np.ndarray) -> bytes:
    """Encode uint8 data as-is; floats are taken as [0, 1] and rounded to 8 bits."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.round(np.clip(img.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(image))


def seconds_to_us(text: str) -> int:
    """Decimal seconds to integer microseconds, rounded down, without float error."""
    try:
        value = Decimal(text)
    except InvalidOperation as exc:
        raise FileFormatError(f"invalid timestamp {text!r}") from exc
    if not value.is_finite():
        raise FileFormatError(f"invalid timestamp {text!r}")
    return int((value * 1_000_000).to_integral_value(rounding="ROUND_FLOOR"))


def us_to_seconds(t_us: int) -> str:
    return f"{t_us // 1_000_000}.{t_us % 1_000_000:06d}"


def read_frame_manifest(path) -> FrameSequence:
    """Load ``relative_path timestamp_seconds`` lines into a frame sequence."""
    path = Path(path)
    base = path.parent
    frames, stamps = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.rsplit(None, 1)
        if len(parts) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected '<path> <seconds>'")
        rel, ts = parts
        t_us = seconds_to_us(ts)
        if t_us < 0:
            raise FileFormatError(f"{path}:{lineno}: negative timestamp")
        if stamps and t_us <= stamps[-1]:
            raise OrderingError(f"{path}:{lineno}: timestamp {ts} not after previous frame")
        try:
            img = read_pgm(base / rel)
        except OSError as exc:
            raise FileFormatError(f"{path}:{lineno}: cannot read {rel}: {exc}") from exc
        except FileFormatError as exc:
            raise FileFormatError(f"{path}:{lineno}: {rel}: {exc}") from exc
        if frames and img.shape != frames[0].shape:
            raise BoundsError(f"{path}:{lineno}: {rel} is {img.shape[1]}x{img.shape[0]}, "
                              f"expected {frames[0].shape[1]}x{frames[0].shape[0]}")
        frames.append(img)
        stamps.append(t_us)
    if not frames:
        raise FileFormatError(f"{path}: manifest lists no frames")
    pixels = np.stack(frames).astype(np.float32) / np.float32(255.0)
    return FrameSequence(pixels, stamps)


def write_frame_manifest(path, seq: FrameSequence, frame_dir: str = "frames") -> None:
    """Write frames as 8-bit PGMs next to the manifest."""
    path = Path(path)
    (path.parent / frame_dir).mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(len(seq)):
        rel = f"{frame_dir}/{i:06d}.pgm"
        write_pgm(path.parent / rel, seq.pixels[i])
        lines.append(f"{rel} {us_to_seconds(int(seq.timestamps[i]))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_flow_dir(directory, flows) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, fl in enumerate(flows):
        write_flow(directory / f"{i:06d}.flo", fl)


def read_timestamps(path) -> list[int]:
    """One decimal-seconds timestamp per line, returned in microseconds."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(seconds_to_us(line))
    return out

