import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..annotation.points import PointSet, annotate_first_frame, load_points
from ..data.sample_io import POINTS_FILE, list_samples, mask_dir, read_masks, read_sample, write_masks
from ..data.video import VideoSample
from ..errors import UsageError
from ..global_utils import parse_ints


log = logging.getLogger(__name__)

POINT_MODES = ["auto", "file"]

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Order-preserving map; threads when ``jobs`` > 1."""
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def require_dir(path: str, what: str) -> Path:
    if not path:
        raise UsageError(f"[clickvos.cli] --{what} is required")
    p = Path(path).expanduser()
    if not p.is_dir():
        raise UsageError(f"[clickvos.cli] {what} directory not found: {p}")
    return p


def require_file(path: str, what: str) -> Path:
    if not path:
        raise UsageError(f"[clickvos.cli] --{what} is required")
    p = Path(path).expanduser()
    if not p.is_file():
        raise UsageError(f"[clickvos.cli] {what} file not found: {p}")
    return p


def parse_hw(value: str) -> Tuple[int, int]:
    hw = parse_ints(value, expected=2)
    if hw is None or min(hw) < 1:
        raise UsageError(f"[clickvos.cli] expected H,W as two positive integers, got '{value}'")
    return hw[0], hw[1]


def load_dataset(root) -> List[Tuple[Path, VideoSample]]:
    seq_dirs = list_samples(root)
    if not seq_dirs:
        raise UsageError(f"[clickvos.cli] no sequences (directories with meta.json) under {root}")
    return [(d, read_sample(d)) for d in seq_dirs]


def resolve_points(seq_dir: Path, sample: VideoSample, mode: str, seed: int) -> PointSet:
    if mode == "file":
        return load_points(seq_dir / POINTS_FILE, shape=(sample.height, sample.width))
    return annotate_first_frame(sample.masks[0], seed)


def sequence_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def load_mask_sets(root) -> dict:
    """``{sequence name: T x H x W labels}`` for every sequence directory holding masks."""
    root = Path(root)
    out = {}
    for seq in sorted(p for p in root.iterdir() if p.is_dir()):
        found = mask_dir(seq)
        if found is None:
            log.debug(f"[clickvos.load_mask_sets] no masks under {seq}")
            continue
        out[seq.name] = read_masks(found)
    return out


def write_prediction(out_root: Path, name: str, masks: np.ndarray) -> Path:
    return write_masks(out_root / name / "masks", masks)
