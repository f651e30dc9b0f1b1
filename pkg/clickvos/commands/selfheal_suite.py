import logging
from typing import Any, Dict, Tuple

from ..evaluation.selfheal import SelfHealResult, selfheal_suite
from ..model.abs_net import load_model
from .common import parse_hw, require_file


log = logging.getLogger(__name__)


class SelfHealSuite:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "ckpt": ("STRING", {}),
            },
            "optional": {
                "num": ("INT", {"default": 10, "min": 1}),
                "seed": ("INT", {"default": 0}),
                "fraction": ("FLOAT", {"default": 0.3, "min": 0.0, "max": 1.0,
                                       "tooltip": "Share of each object's area corrupted in the frame-1 memory mask."}),
                "hw": ("STRING", {"default": "64,64"}),
                "frames": ("INT", {"default": 8, "min": 2}),
                "objmem": (["first_only", "all"], {"default": None}),
                "densemem": (["on", "off"], {"default": None}),
            },
        }

    RETURN_TYPES = ("RESULT", "STRING")
    RETURN_NAMES = ("result", "summary")
    FUNCTION = "run"
    CATEGORY = "clickvos/evaluation"
    DEFAULT_COMMAND_NAME = "selfheal-suite"

    HELP_TEXT = """Feeds a corrupted frame-1 mask into memory on fresh two-object sequences and prints the median object J
of every frame, plus whether the last frame beats frame 2."""

    def run(self, ckpt: str, num: int = 10, seed: int = 0, fraction: float = 0.3, hw: str = "64,64",
            frames: int = 8, objmem: str = None, densemem: str = None, **kwargs) -> Tuple[SelfHealResult, str]:
        height, width = parse_hw(hw)
        model = load_model(require_file(ckpt, "ckpt"), objmem=objmem, densemem=densemem)
        result = selfheal_suite(model, num, seed, fraction, height, width, frames)
        lines = [f"frame {t + 1:3d}  median J {j:.4f}" for t, j in enumerate(result.median_j)]
        verdict = "healed" if result.healed else "not healed"
        lines.append(f"frame {frames} vs frame 2: {verdict}")
        return result, "\n".join(lines)
