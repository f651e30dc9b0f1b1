import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

from ..data.sample_io import write_sample
from ..data.scene import gen_sequence, make_specs
from .common import parallel_map, parse_hw


log = logging.getLogger(__name__)


class GenerateData:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "out": ("STRING", {"tooltip": "Output directory; one sub-directory per sequence."}),
            },
            "optional": {
                "num": ("INT", {"default": 10, "min": 1, "tooltip": "Number of sequences."}),
                "hw": ("STRING", {"default": "64,64", "tooltip": "Canvas height,width in pixels."}),
                "frames": ("INT", {"default": 8, "min": 1}),
                "objects": ("INT", {"default": 2, "min": 1}),
                "seed": ("INT", {"default": 0}),
                "occlusion_every": ("INT", {"default": 0, "min": 0,
                                            "tooltip": "Every k-th sequence is a crossing-behind scene (0 = none)."}),
                "prefix": ("STRING", {"default": "seq"}),
                "jobs": ("INT", {"default": 1, "min": 1}),
            },
        }

    RETURN_TYPES = ("LIST", "STRING")
    RETURN_NAMES = ("paths", "summary")
    FUNCTION = "generate"
    CATEGORY = "clickvos/data"
    DEFAULT_COMMAND_NAME = "gen-data"

    HELP_TEXT = """Renders moving-shapes sequences with exact forward flow and instance masks.
Each sequence directory holds frames/*.ppm, masks/*.pgm, flow/*.flo and meta.json."""

    def generate(self, out: str, num: int = 10, hw: str = "64,64", frames: int = 8, objects: int = 2,
                 seed: int = 0, occlusion_every: int = 0, prefix: str = "seq", jobs: int = 1,
                 **kwargs) -> Tuple[List[Path], str]:
        height, width = parse_hw(hw)
        root = Path(out).expanduser()
        root.mkdir(parents=True, exist_ok=True)
        specs = make_specs(num, height, width, frames, objects, seed, occlusion_every, prefix)

        def _one(spec):
            return write_sample(gen_sequence(spec), root / spec.name)

        paths = parallel_map(_one, specs, jobs)
        log.info(f"[clickvos.GenerateData] wrote {len(paths)} sequence(s) to {root}")
        return paths, f"{len(paths)} sequence(s) written to {root}"

