import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

from ..baseline.point_track import DEFAULT_TAU, run_baseline
from .common import POINT_MODES, load_dataset, parallel_map, require_dir, resolve_points, sequence_seed, write_prediction


log = logging.getLogger(__name__)


class Baseline:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "data": ("STRING", {}),
                "out": ("STRING", {}),
            },
            "optional": {
                "points": (POINT_MODES, {"default": "auto"}),
                "seed": ("INT", {"default": 0}),
                "tau": ("FLOAT", {"default": DEFAULT_TAU, "min": 0.0,
                                  "tooltip": "Colour distance threshold in the unit RGB cube."}),
                "jobs": ("INT", {"default": 1, "min": 1}),
            },
        }

    RETURN_TYPES = ("LIST", "STRING")
    RETURN_NAMES = ("sequences", "summary")
    FUNCTION = "run"
    CATEGORY = "clickvos/baseline"

    HELP_TEXT = """Point-tracking baseline: every click is advected by the forward flow and the object is region-grown
around the tracked point each frame. Contested pixels go to the nearer seed. Output layout matches infer."""

    def run(self, data: str, out: str, points: str = "auto", seed: int = 0, tau: float = DEFAULT_TAU,
            jobs: int = 1, **kwargs) -> Tuple[List[str], str]:
        dataset = load_dataset(require_dir(data, "data"))
        root = Path(out).expanduser()

        def _one(item):
            index, (seq_dir, sample) = item
            clicks = resolve_points(seq_dir, sample, points, sequence_seed(seed, index))
            write_prediction(root, seq_dir.name, run_baseline(sample, clicks, tau))
            return seq_dir.name

        names = parallel_map(_one, list(enumerate(dataset)), jobs)
        log.info(f"[clickvos.Baseline] wrote baseline masks for {len(names)} sequence(s) to {root}")
        return names, f"{len(names)} sequence(s) tracked into {root} (tau={tau:g})"
