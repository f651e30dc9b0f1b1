"""Binary PPM (P6) and PGM (P5) with maxval 255."""

import logging
import re
from pathlib import Path
from typing import Tuple

import numpy as np

from ..errors import FormatError


log = logging.getLogger(__name__)

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def quantize(values: np.ndarray) -> np.ndarray:
    """[0, 1] floats -> uint8 as round(255 v)."""
    return np.floor(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _read_header(path: Path, blob: bytes) -> Tuple[bytes, int, int, int, int]:
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(blob, pos)
        if m is None:
            raise FormatError(path, "truncated netpbm header")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0]
    try:
        width, height, maxval = (int(v) for v in fields[1:])
    except ValueError as e:
        raise FormatError(path, f"bad netpbm header: {e}") from e
    # exactly one whitespace byte separates the header from the raster
    return magic, width, height, maxval, pos + 1


def _write(path, magic: bytes, raster: np.ndarray, width: int, height: int) -> None:
    with Path(path).open("wb") as f:
        f.write(magic + b"\n" + f"{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(raster, dtype=np.uint8).tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise FormatError(path, f"PPM raster must be H x W x 3, got {rgb.shape}")
    if rgb.dtype != np.uint8:
        rgb = quantize(rgb)
    _write(path, b"P6", rgb, rgb.shape[1], rgb.shape[0])


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise FormatError(path, f"PGM raster must be H x W, got {gray.shape}")
    if gray.size and (gray.min() < 0 or gray.max() > 255):
        raise FormatError(path, "PGM values must lie in [0, 255]")
    _write(path, b"P5", gray.astype(np.uint8), gray.shape[1], gray.shape[0])


def _read(path, expected_magic: bytes, channels: int) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    magic, width, height, maxval, offset = _read_header(path, blob)
    if magic != expected_magic:
        raise FormatError(path, f"bad magic {magic!r}, expected {expected_magic!r}")
    if maxval != 255:
        raise FormatError(path, f"unsupported maxval {maxval}")
    size = width * height * channels
    if len(blob) - offset != size:
        raise FormatError(path, f"raster is {len(blob) - offset} bytes, expected {size} for {width}x{height}")
    raster = np.frombuffer(blob, dtype=np.uint8, count=size, offset=offset)
    shape = (height, width, channels) if channels > 1 else (height, width)
    return raster.reshape(shape).copy()


def read_ppm(path) -> np.ndarray:
    return _read(path, b"P6", 3)


def read_pgm(path) -> np.ndarray:
    return _read(path, b"P5", 1)
