"""Parameter checkpoint format.

Layout: magic ``ABSW``, u32 format version, then records until end of file:
u16 name length, utf-8 name, u8 rank, u32 extent per axis, float64 values;
all integers and floats little-endian.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from ..errors import FormatError


log = logging.getLogger(__name__)

MAGIC = b"ABSW"
FORMAT_VERSION = 1


def save_parameters(path, params: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        for name, value in params.items():
            arr = np.asarray(value, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes(order="C"))
    log.info(f"[clickvos.checkpoint] wrote {len(params)} tensors to {path}")
    return path


def load_parameters(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(path, "checkpoint file not found")
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise FormatError(path, f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 8:
        raise FormatError(path, "truncated header")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise FormatError(path, f"unsupported format version {version}")

    params: Dict[str, np.ndarray] = {}
    pos = 8
    try:
        while pos < len(blob):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(shape)) if rank else 1
            nbytes = 8 * count
            if pos + nbytes > len(blob):
                raise FormatError(path, f"record '{name}' is truncated")
            params[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
            pos += nbytes
    except struct.error as e:
        raise FormatError(path, f"truncated record: {e}") from e
    return params


def config_sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_checkpoint(path, params: Mapping[str, np.ndarray], config: Optional[Dict[str, Any]] = None) -> Path:
    """Parameters plus a JSON sidecar holding the model configuration."""
    out = save_parameters(path, params)
    if config is not None:
        with config_sidecar(path).open("w", encoding="utf-8") as f:
            json.dump(config, f, ensure_ascii=False, indent=2)
    return out


def load_checkpoint(path):
    params = load_parameters(path)
    sidecar = config_sidecar(path)
    config = None
    if sidecar.is_file():
        try:
            with sidecar.open("r", encoding="utf-8") as f:
                config = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(sidecar, f"invalid JSON: {e}") from e
    return params, config
