"""Malformed-file corpus: each entry is written to disk and must be rejected."""

import struct

import numpy as np

from eventsynth import io

EVT_HEADER = "<4sHHHQ"
EVT_RECORD = "<QHHb"


def _evt(records, magic=b"EVT1", version=1, width=8, height=6, count=None):
    count = len(records) if count is None else count
    body = b"".join(struct.pack(EVT_RECORD, *r) for r in records)
    return struct.pack(EVT_HEADER, magic, version, width, height, count) + body


def _flo(w, h, values=None, magic=b"FLO1"):
    planes = np.zeros((4, h, w), dtype="<f4") if values is None else values
    return struct.pack("<4sHH", magic, w, h) + planes.tobytes()


def _tns(kind, c, h, w, magic=b"TNS1", extra=0):
    return struct.pack("<4sHHHH", magic, kind, c, h, w) + b"\0" * (4 * c * h * w + extra)


def _pgm(w, h, maxval=255, magic=b"P5", raster=None):
    raster = bytes(w * h) if raster is None else raster
    return magic + f"\n{w} {h}\n{maxval}\n".encode() + raster


def build(root):
    """Write the corpus under ``root``; return (name, reader, path, error class) tuples."""
    root.mkdir(parents=True, exist_ok=True)
    nan_flow = np.zeros((4, 2, 2), dtype="<f4")
    nan_flow[2, 1, 0] = np.nan
    ok = [(10, 1, 1, 1), (20, 2, 1, -1)]
    binaries = [
        ("evt_bad_magic", io.read_events, _evt(ok, magic=b"EVT0"), io.FileFormatError),
        ("evt_bad_version", io.read_events, _evt(ok, version=2), io.FileFormatError),
        ("evt_short_header", io.read_events, _evt(ok)[:10], io.FileFormatError),
        ("evt_truncated", io.read_events, _evt(ok)[:-5], io.FileFormatError),
        ("evt_count_too_large", io.read_events, _evt(ok, count=3), io.FileFormatError),
        ("evt_trailing_bytes", io.read_events, _evt(ok) + b"\0", io.FileFormatError),
        ("evt_bad_polarity", io.read_events, _evt([(10, 1, 1, 0)]), io.FileFormatError),
        ("evt_x_out_of_bounds", io.read_events, _evt([(10, 8, 1, 1)]), io.BoundsError),
        ("evt_y_out_of_bounds", io.read_events, _evt([(10, 1, 6, 1)]), io.BoundsError),
        ("evt_unsorted_time", io.read_events, _evt([(20, 1, 1, 1), (10, 1, 1, 1)]), io.OrderingError),
        ("evt_unsorted_tiebreak", io.read_events, _evt([(10, 2, 1, 1), (10, 1, 1, 1)]), io.OrderingError),
        ("flo_bad_magic", io.read_flow, _flo(2, 2, magic=b"FLOW"), io.FileFormatError),
        ("flo_truncated", io.read_flow, _flo(2, 2)[:-1], io.FileFormatError),
        ("flo_oversized", io.read_flow, _flo(2, 2) + b"\0\0\0\0", io.FileFormatError),
        ("flo_short_header", io.read_flow, b"FLO", io.FileFormatError),
        ("flo_non_finite", io.read_flow, _flo(2, 2, nan_flow), io.FileFormatError),
        ("tns_bad_magic", io.read_tensor, _tns(0, 2, 1, 1, magic=b"TNSX"), io.FileFormatError),
        ("tns_bad_kind", io.read_tensor, _tns(7, 2, 1, 1), io.FileFormatError),
        ("tns_truncated", io.read_tensor, _tns(0, 2, 2, 2)[:-3], io.FileFormatError),
        ("tns_trailing", io.read_tensor, _tns(1, 6, 1, 1, extra=4), io.FileFormatError),
        ("pgm_ascii_magic", io.read_pgm, _pgm(2, 2, magic=b"P2"), io.FileFormatError),
        ("pgm_16_bit", io.read_pgm, _pgm(2, 2, maxval=65535), io.FileFormatError),
        ("pgm_truncated", io.read_pgm, _pgm(3, 3)[:-1], io.FileFormatError),
        ("pgm_bad_header", io.read_pgm, b"P5\nx 2\n255\n\0\0", io.FileFormatError),
        ("pgm_zero_size", io.read_pgm, _pgm(0, 2), io.FileFormatError),
    ]
    out = []
    for name, reader, data, err in binaries:
        path = root / name
        path.write_bytes(data)
        out.append((name, reader, path, err))

    frames = root / "frames"
    frames.mkdir(exist_ok=True)
    (frames / "a.pgm").write_bytes(_pgm(4, 3))
    (frames / "b.pgm").write_bytes(_pgm(4, 3))
    (frames / "wide.pgm").write_bytes(_pgm(5, 3))
    (frames / "broken.pgm").write_bytes(b"P6\n4 3\n255\n")
    manifests = [
        ("man_non_monotone", "frames/a.pgm 0.0\nframes/b.pgm 0.5\nframes/a.pgm 0.5\n", io.OrderingError),
        ("man_geometry_mismatch", "frames/a.pgm 0.0\nframes/wide.pgm 0.1\n", io.BoundsError),
        ("man_missing_frame", "frames/a.pgm 0.0\nframes/none.pgm 0.1\n", io.FileFormatError),
        ("man_broken_frame", "frames/a.pgm 0.0\nframes/broken.pgm 0.1\n", io.FileFormatError),
        ("man_bad_timestamp", "frames/a.pgm zero\n", io.FileFormatError),
        ("man_missing_field", "frames/a.pgm\n", io.FileFormatError),
        ("man_empty", "# nothing\n", io.FileFormatError),
    ]
    for name, text, err in manifests:
        path = root / f"{name}.txt"
        path.write_text(text, encoding="utf-8")
        out.append((name, io.read_frame_manifest, path, err))
    return out
