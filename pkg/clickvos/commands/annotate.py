import logging
from typing import Any, Dict, List, Tuple

from ..annotation.points import annotate_first_frame, write_points
from ..data.sample_io import POINTS_FILE
from .common import load_dataset, require_dir, sequence_seed


log = logging.getLogger(__name__)


class Annotate:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "data": ("STRING", {"tooltip": "Dataset directory written by gen-data."}),
            },
            "optional": {
                "seed": ("INT", {"default": 0}),
            },
        }

    RETURN_TYPES = ("INT", "STRING")
    RETURN_NAMES = ("fallbacks", "summary")
    FUNCTION = "annotate"
    CATEGORY = "clickvos/annotation"

    HELP_TEXT = """Writes <seq>/points.json with one click per object plus a background click.
Each object mask is eroded by max(1, floor(0.1 * shorter bbox side)) before sampling; thin objects fall back to the full mask."""

    def annotate(self, data: str, seed: int = 0, **kwargs) -> Tuple[int, str]:
        root = require_dir(data, "data")
        fallbacks = 0
        dataset = load_dataset(root)
        for i, (seq_dir, sample) in enumerate(dataset):
            points = annotate_first_frame(sample.masks[0], sequence_seed(seed, i), sample.object_ids or None)
            fallbacks += sum(1 for p in points if p.fallback)
            write_points(seq_dir / POINTS_FILE, points)
        log.info(f"[clickvos.Annotate] annotated {len(dataset)} sequence(s), {fallbacks} fallback(s)")
        return fallbacks, f"{len(dataset)} sequence(s) annotated ({fallbacks} thin-object fallback(s))"
