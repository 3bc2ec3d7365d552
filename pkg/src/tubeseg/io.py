"""File formats: Middlebury ``.flo``, detection CSV, netpbm frames and masks."""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .core import BoundingBox, Detection, FlowField, Image, InputError

FLO_MAGIC = 202021.25
DETECTION_FIELDS = ("frame", "x_min", "y_min", "x_max", "y_max", "score", "category")


class FormatError(InputError):
    pass


def read_flo(data: bytes) -> FlowField:
    if len(data) < 12:
        raise FormatError("truncated .flo header")
    (magic,) = struct.unpack("<f", data[:4])
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad .flo magic {magic!r}")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise FormatError(f"bad .flo dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise FormatError(f".flo payload is {len(data)} bytes, expected {expected}")
    uv = np.frombuffer(data, dtype="<f4", offset=12).reshape(height, width, 2)
    return FlowField(uv[..., 0].astype(np.float64), uv[..., 1].astype(np.float64))


def write_flo(f: FlowField) -> bytes:
    uv = np.stack([f.u, f.v], axis=-1).astype("<f4")
    return struct.pack("<fii", FLO_MAGIC, f.width, f.height) + uv.tobytes()


def read_detections(text: str) -> list[Detection]:
    """Parse detection CSV (header required); returns detections sorted by frame."""
    reader = csv.reader(io.StringIO(text))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        return []
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if tuple(header) != DETECTION_FIELDS:
        raise FormatError(f"line {header_line}: expected header {','.join(DETECTION_FIELDS)}")
    out = []
    for line, row in rows[1:]:
        if len(row) != len(DETECTION_FIELDS):
            raise FormatError(f"line {line}: expected {len(DETECTION_FIELDS)} fields, got {len(row)}")
        try:
            frame, x0, y0, x1, y1 = (int(v) for v in row[:5])
            score = float(row[5])
        except ValueError as exc:
            raise FormatError(f"line {line}: {exc}") from None
        category = row[6].strip()
        if not category:
            raise FormatError(f"line {line}: empty category")
        try:
            out.append(Detection(frame, BoundingBox(x0, y0, x1, y1), score, category))
        except InputError as exc:
            raise FormatError(f"line {line}: {exc}") from None
    return sorted(out, key=lambda d: d.frame)


def write_detections(detections) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTION_FIELDS)
    for d in detections:
        w.writerow([d.frame, *d.box.as_tuple(), repr(float(d.score)), d.category])
    return buf.getvalue()


def _read_netpbm(data: bytes):
    """Return ``(magic, width, height, maxval, payload)`` of a binary netpbm file."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated netpbm header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    magic = tokens[0].decode("ascii", "replace")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-numeric netpbm header") from None
    return magic, width, height, maxval, data[pos:]


def read_pgm(data: bytes) -> np.ndarray:
    magic, w, h, maxval, raster = _read_netpbm(data)
    if magic != "P5":
        raise FormatError(f"not a binary PGM (magic {magic})")
    dtype = ">u2" if maxval > 255 else "u1"
    need = w * h * np.dtype(dtype).itemsize
    if len(raster) < need:
        raise FormatError("truncated PGM raster")
    return np.frombuffer(raster[:need], dtype=dtype).reshape(h, w).astype(np.int64)


def write_pgm(arr, sixteen_bit: bool = False) -> bytes:
    a = np.asarray(arr)
    maxval = 65535 if sixteen_bit else 255
    if a.size and (a.min() < 0 or a.max() > maxval):
        raise ValueError(f"values outside 0..{maxval}")
    dtype = ">u2" if sixteen_bit else "u1"
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n{maxval}\n".encode("ascii")
    return header + a.astype(dtype).tobytes()


def read_ppm(data: bytes) -> Image:
    magic, w, h, maxval, raster = _read_netpbm(data)
    if magic != "P6" or maxval != 255:
        raise FormatError(f"only 8-bit binary PPM is supported (magic {magic}, maxval {maxval})")
    if len(raster) < w * h * 3:
        raise FormatError("truncated PPM raster")
    return Image(np.frombuffer(raster[: w * h * 3], dtype=np.uint8).reshape(h, w, 3))


def write_ppm(img: Image) -> bytes:
    return f"P6\n{img.width} {img.height}\n255\n".encode("ascii") + img.pixels.tobytes()


def read_image(path) -> Image:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path.read_bytes())
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("RGB")))
    raise FormatError(f"unsupported frame format {path.suffix!r}")


def read_label_map(path) -> np.ndarray:
    return read_pgm(Path(path).read_bytes())
