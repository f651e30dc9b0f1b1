import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from ..data.netpbm import write_ppm
from ..data.overlay import render_overlay
from ..data.sample_io import POINTS_FILE, frame_name, mask_dir, read_masks
from ..errors import FormatError
from .common import load_dataset, require_dir, resolve_points, sequence_seed


log = logging.getLogger(__name__)


class Overlay:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "data": ("STRING", {}),
                "masks": ("STRING", {"tooltip": "Mask root in the infer/baseline layout."}),
                "out": ("STRING", {}),
            },
            "optional": {
                "seed": ("INT", {"default": 0, "tooltip": "Click seed when a sequence has no points.json."}),
                "alpha": ("FLOAT", {"default": 0.5, "min": 0.0, "max": 1.0}),
            },
        }

    RETURN_TYPES = ("INT", "STRING")
    RETURN_NAMES = ("frames", "summary")
    FUNCTION = "render"
    CATEGORY = "clickvos/data"

    HELP_TEXT = """Writes <out>/<seq>/*.ppm: each frame with the masks blended in per-object colours and the frame-1 clicks drawn as crosses."""

    def render(self, data: str, masks: str, out: str, seed: int = 0, alpha: float = 0.5,
               **kwargs) -> Tuple[int, str]:
        mask_root = require_dir(masks, "masks")
        root = Path(out).expanduser()
        written = 0
        for index, (seq_dir, sample) in enumerate(load_dataset(require_dir(data, "data"))):
            found = mask_dir(mask_root / seq_dir.name)
            if found is None:
                log.warning(f"[clickvos.Overlay] no masks for '{seq_dir.name}'; skipped")
                continue
            labels = read_masks(found)
            if labels.shape != sample.masks.shape:
                raise FormatError(found, f"mask stack {labels.shape} does not match frames {sample.masks.shape}")
            mode = "file" if (seq_dir / POINTS_FILE).is_file() else "auto"
            clicks = resolve_points(seq_dir, sample, mode, sequence_seed(seed, index))
            (root / seq_dir.name).mkdir(parents=True, exist_ok=True)
            for t in range(sample.num_frames):
                image = render_overlay(sample.frames[t], labels[t], clicks if t == 0 else None, alpha)
                write_ppm(root / seq_dir.name / frame_name(t + 1, "ppm"), image)
                written += 1
        log.info(f"[clickvos.Overlay] wrote {written} frame(s) to {root}")
        return written, f"{written} overlay frame(s) written to {root}"
