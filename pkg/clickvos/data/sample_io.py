"""On-disk sequence layout.

    <seq>/frames/000001.ppm ...
    <seq>/masks/000001.pgm ...
    <seq>/flow/000001.flo ...     (frame 1 holds a copy of frame 2's flow)
    <seq>/meta.json
"""

import json
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..errors import FormatError
from .flow import encode_flow, read_flo, write_flo
from .netpbm import read_pgm, read_ppm, write_pgm, write_ppm
from .video import VideoSample


log = logging.getLogger(__name__)

META_FILE = "meta.json"
POINTS_FILE = "points.json"


def frame_name(t: int, ext: str) -> str:
    """1-based, zero padded frame file name."""
    return f"{t:06d}.{ext}"


def write_masks(directory, masks: np.ndarray) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, mask in enumerate(masks, start=1):
        write_pgm(directory / frame_name(t, "pgm"), mask)
    return directory


def write_sample(sample: VideoSample, directory) -> Path:
    directory = Path(directory)
    for sub in ("frames", "flow"):
        (directory / sub).mkdir(parents=True, exist_ok=True)

    for t in range(sample.num_frames):
        write_ppm(directory / "frames" / frame_name(t + 1, "ppm"), sample.frames[t])
        write_flo(directory / "flow" / frame_name(t + 1, "flo"), sample.flow[t])
    write_masks(directory / "masks", sample.masks)

    meta = {
        "H": sample.height,
        "W": sample.width,
        "T": sample.num_frames,
        "object_ids": [int(i) for i in sample.object_ids],
        "seed": int(sample.seed),
        "v_max": float(sample.v_max),
        "name": sample.name or directory.name,
    }
    with (directory / META_FILE).open("w", encoding="utf-8") as f:
        json.dump(meta, f, ensure_ascii=False, indent=2)
    log.debug(f"[clickvos.write_sample] wrote {sample.num_frames} frame(s) to {directory}")
    return directory


def _read_meta(directory: Path) -> dict:
    path = directory / META_FILE
    if not path.is_file():
        raise FormatError(path, "sequence meta file not found")
    try:
        with path.open("r", encoding="utf-8") as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(path, f"invalid JSON: {e}") from e
    for key in ("H", "W", "T", "object_ids"):
        if key not in meta:
            raise FormatError(path, f"missing key '{key}'")
    return meta


def _checked(path: Path, array: np.ndarray, shape) -> np.ndarray:
    if tuple(array.shape) != tuple(shape):
        raise FormatError(path, f"dimensions {tuple(array.shape)} do not match meta {tuple(shape)}")
    return array


def read_sample(directory) -> VideoSample:
    directory = Path(directory)
    meta = _read_meta(directory)
    H, W, T = int(meta["H"]), int(meta["W"]), int(meta["T"])
    v_max = float(meta.get("v_max", 4.0))

    frames = np.empty((T, H, W, 3), dtype=np.float64)
    masks = np.empty((T, H, W), dtype=np.uint8)
    flow = np.empty((T, H, W, 2), dtype=np.float32)
    for t in range(T):
        for sub, ext in (("frames", "ppm"), ("masks", "pgm"), ("flow", "flo")):
            if not (directory / sub / frame_name(t + 1, ext)).is_file():
                raise FormatError(directory / sub / frame_name(t + 1, ext), "missing frame file")
        p = directory / "frames" / frame_name(t + 1, "ppm")
        frames[t] = _checked(p, read_ppm(p), (H, W, 3)) / 255.0
        p = directory / "masks" / frame_name(t + 1, "pgm")
        masks[t] = _checked(p, read_pgm(p), (H, W))
        p = directory / "flow" / frame_name(t + 1, "flo")
        flow[t] = _checked(p, read_flo(p), (H, W, 2))

    return VideoSample(
        frames=frames,
        flow=flow,
        flow_images=encode_flow(flow, v_max),
        masks=masks,
        object_ids=[int(i) for i in meta["object_ids"]],
        v_max=v_max,
        seed=int(meta.get("seed", 0)),
        name=str(meta.get("name", directory.name)),
    )


def list_samples(root) -> List[Path]:
    """Sequence directories (those holding a meta file) under ``root``, by name."""
    base = Path(root).expanduser()
    if not base.is_dir():
        return []
    found = [p.parent for p in base.glob(f"*/{META_FILE}") if p.is_file()]
    if (base / META_FILE).is_file():
        found.append(base)
    return sorted(found, key=lambda p: p.name.lower())


def mask_dir(sequence_dir) -> Optional[Path]:
    """``<seq>/masks`` when present, else ``<seq>`` itself when it holds PGM files."""
    sequence_dir = Path(sequence_dir)
    nested = sequence_dir / "masks"
    if nested.is_dir():
        return nested
    if any(sequence_dir.glob("*.pgm")):
        return sequence_dir
    return None


def read_mask_files(directory) -> List[Path]:
    return sorted(Path(directory).glob("*.pgm"), key=lambda p: p.name)


def read_masks(directory) -> np.ndarray:
    files = read_mask_files(directory)
    if not files:
        raise FormatError(directory, "no PGM masks found")
    masks = [read_pgm(p) for p in files]
    shape = masks[0].shape
    for p, m in zip(files, masks):
        _checked(p, m, shape)
    return np.stack(masks)
