"""Image/depth file I/O and per-pixel colour utilities.

Images are float64 arrays of shape (H, W, 3) holding linear intensities in
[0, 1]. Depth maps and other scalar maps are (H, W) float64 arrays.
"""
import csv
from pathlib import Path

import cv2
import numpy as np

from .exceptions import ImageIOError, UnsupportedFormat
from .validation import check_depth, check_image

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc


def _write_bytes(path, data):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def _ppm_header(raw, path):
    """Parse a binary PPM header, returning (width, height, maxval, offset)."""
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise ImageIOError(f"{path}: truncated PPM header")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageIOError(f"{path}: malformed PPM header") from exc
    if not 0 < maxval < 65536:
        raise ImageIOError(f"{path}: invalid PPM maxval {maxval}")
    return width, height, maxval, pos


def _decode_ppm(raw, path):
    width, height, maxval, offset = _ppm_header(raw, path)
    if width < 1 or height < 1:
        raise ImageIOError(f"{path}: zero-sized image")
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    count = width * height * 3
    if len(raw) - offset < count * dtype.itemsize:
        raise ImageIOError(f"{path}: truncated PPM raster")
    body = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = body.astype(np.float64).reshape(height, width, 3)
    return data / maxval


def _decode_png(raw, path):
    arr = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ImageIOError(f"{path}: corrupt PNG")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise UnsupportedFormat(f"{path}: only RGB PNGs are supported, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        maxval = 255.0
    elif arr.dtype == np.uint16:
        maxval = 65535.0
    else:
        raise UnsupportedFormat(f"{path}: unsupported PNG sample type {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageIOError(f"{path}: zero-sized image")
    return arr[:, :, ::-1].astype(np.float64) / maxval


def load_image(path):
    """Load an 8/16-bit RGB PNG or a binary PPM (P6) as linear [0, 1] floats.

    Samples are divided by the format's maximum value; no gamma decoding is
    applied.
    """
    raw = _read_bytes(path)
    if raw.startswith(PNG_MAGIC):
        return _decode_png(raw, path)
    if raw[:2] == b"P6":
        return _decode_ppm(raw, path)
    raise UnsupportedFormat(f"{path}: not a PNG or binary PPM file")


def quantize16(img):
    """Map [0, 1] intensities to uint16 with round-half-up."""
    return np.floor(np.asarray(img, dtype=np.float64) * 65535.0 + 0.5).astype(np.uint16)


def save_image(img, path):
    """Write ``img`` as a 16-bit RGB PNG (samples = round(v * 65535))."""
    img = check_image(img)
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(quantize16(img)[:, :, ::-1]))
    if not ok:
        raise ImageIOError(f"PNG encoding failed for {path}")
    _write_bytes(path, buf.tobytes())


def save_gray16(values, path):
    """Write an integer-valued (H, W) map as a 16-bit grayscale PNG."""
    arr = np.asarray(values)
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 65535:
        raise ValueError("values do not fit in 16 bits")
    ok, buf = cv2.imencode(".png", arr.astype(np.uint16))
    if not ok:
        raise ImageIOError(f"PNG encoding failed for {path}")
    _write_bytes(path, buf.tobytes())


def load_depth(path):
    """Load a depth map from a single-channel PFM or a CSV grid.

    Depths are returned as given (no rescaling); negative values raise
    NegativeDepth and ragged CSV rows raise ImageIOError.
    """
    path = Path(path)
    raw = _read_bytes(path)
    if raw[:2] == b"Pf":
        depth = _decode_pfm(raw, path)
    elif raw[:2] == b"PF":
        raise UnsupportedFormat(f"{path}: colour PFM is not a depth map")
    else:
        depth = _decode_csv(raw, path)
    return check_depth(depth, name=str(path))


def _decode_csv(raw, path):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UnsupportedFormat(f"{path}: not a PFM or CSV file") from exc
    rows = [row for row in csv.reader(text.splitlines()) if row]
    if not rows:
        raise ImageIOError(f"{path}: empty depth grid")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ImageIOError(f"{path}: ragged CSV, row {i} has {len(row)} columns, expected {width}")
    try:
        return np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ImageIOError(f"{path}: non-numeric CSV entry") from exc


def _decode_pfm(raw, path):
    lines = []
    pos = 0
    while len(lines) < 3:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise ImageIOError(f"{path}: truncated PFM header")
        lines.append(raw[pos:end].strip())
        pos = end + 1
    try:
        width, height = (int(v) for v in lines[1].split())
        scale = float(lines[2])
    except ValueError as exc:
        raise ImageIOError(f"{path}: malformed PFM header") from exc
    if width < 1 or height < 1:
        raise ImageIOError(f"{path}: zero-sized depth map")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height
    if len(raw) - pos < count * 4:
        raise ImageIOError(f"{path}: truncated PFM raster")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).reshape(height, width)
    # PFM rows run bottom-to-top
    return data[::-1].astype(np.float64)


def save_depth(depth, path):
    """Write a depth map as little-endian single-channel PFM (float32)."""
    depth = check_depth(depth)
    height, width = depth.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(depth[::-1], dtype="<f4").tobytes()
    _write_bytes(path, header + body)


def save_depth_csv(depth, path):
    depth = check_depth(depth)
    lines = [",".join(repr(float(v)) for v in row) for row in depth]
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def to_gray_min_channel(img):
    """Per-pixel minimum over the three colour channels."""
    return check_image(img).min(axis=2)

