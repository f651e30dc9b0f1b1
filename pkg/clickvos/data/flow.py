"""Flow fields: the linear 3-channel flow image and Middlebury ``.flo`` I/O."""

import logging
import math
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError


log = logging.getLogger(__name__)

FLO_MAGIC = 202021.25


def encode_flow(flow: np.ndarray, v_max: float) -> np.ndarray:
    """(..., 2) displacement -> (..., 3) image (dx/v, dy/v, |d|/(sqrt2 v)) clipped to [-1, 1]."""
    if v_max <= 0:
        raise ValueError(f"[clickvos.encode_flow] v_max must be positive, got {v_max}")
    flow = np.asarray(flow, dtype=np.float64)
    dx = flow[..., 0] / v_max
    dy = flow[..., 1] / v_max
    mag = np.hypot(flow[..., 0], flow[..., 1]) / (math.sqrt(2.0) * v_max)
    return np.clip(np.stack([dx, dy, mag], axis=-1), -1.0, 1.0)


def decode_flow(image: np.ndarray, v_max: float) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image[..., :2] * v_max


def write_flo(path, flow: np.ndarray) -> None:
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FormatError(path, f"flow must be H x W x 2, got {flow.shape}")
    h, w = flow.shape[:2]
    with Path(path).open("wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(np.ascontiguousarray(flow).tobytes())


def read_flo(path) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 12:
        raise FormatError(path, "truncated .flo header")
    (magic,) = struct.unpack_from("<f", blob, 0)
    if magic != FLO_MAGIC:
        raise FormatError(path, f"magic number incorrect ({magic}); invalid .flo file")
    w, h = struct.unpack_from("<ii", blob, 4)
    if w <= 0 or h <= 0:
        raise FormatError(path, f"invalid dimensions {w}x{h}")
    expected = 12 + 8 * w * h
    if len(blob) != expected:
        raise FormatError(path, f"payload is {len(blob) - 12} bytes, expected {8 * w * h} for {w}x{h}")
    return np.frombuffer(blob, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float32)
