import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from ..presets import resolve_config
from ..training.trainer import train
from .common import load_dataset, require_dir


log = logging.getLogger(__name__)


class Train:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "data": ("STRING", {"tooltip": "Training sequences."}),
                "out": ("STRING", {"tooltip": "Checkpoint path (.absw); a .json config sidecar is written next to it."}),
            },
            "optional": {
                "config": ("STRING", {"default": "", "tooltip": "Flat JSON of ModelConfig/TrainConfig fields."}),
                "val": ("STRING", {"default": "", "tooltip": "Held-out sequences for periodic J/F."}),
                "metrics": ("STRING", {"default": "", "tooltip": "Metrics CSV (default: <out>.metrics.csv)."}),
                "steps": ("INT", {"default": None, "min": 0}),
                "seed": ("INT", {"default": None}),
                "lr": ("FLOAT", {"default": None}),
                "eval_every": ("INT", {"default": None, "min": 0}),
                "modality": (["appearance_only", "concat_fuse", "bimodal_enhance"], {"default": None}),
                "objmem": (["first_only", "all"], {"default": None}),
                "densemem": (["on", "off"], {"default": None}),
            },
        }

    RETURN_TYPES = ("PATH", "STRING")
    RETURN_NAMES = ("checkpoint", "summary")
    FUNCTION = "train"
    CATEGORY = "clickvos/training"

    HELP_TEXT = """Trains the toy network by simulating inference on random windows: points are re-sampled every step,
memory is built from predicted masks and the loss is bootstrapped cross-entropy plus dice over every frame.
Command-line values override the config file, which overrides its preset."""

    def train(self, data: str, out: str, config: str = "", val: str = "", metrics: str = "",
              steps: int = None, seed: int = None, lr: float = None, eval_every: int = None,
              modality: str = None, objmem: str = None, densemem: str = None, **kwargs) -> Tuple[Path, str]:
        overrides = {"steps": steps, "seed": seed, "lr": lr, "eval_every": eval_every,
                     "modality": modality, "objmem": objmem, "densemem": densemem}
        model_config, train_config = resolve_config(config or None, overrides)
        samples = [s for _, s in load_dataset(require_dir(data, "data"))]
        val_samples = [s for _, s in load_dataset(require_dir(val, "val"))] if val else []

        checkpoint = Path(out).expanduser()
        metrics_path = Path(metrics) if metrics else checkpoint.with_name(checkpoint.name + ".metrics.csv")
        result = train(train_config, samples, model_config, val_samples, checkpoint, metrics_path)
        final = result.metrics[-1] if result.metrics else None
        summary = f"checkpoint {checkpoint}"
        if final is not None:
            summary += f"; final loss {final.total:.4f}"
            if final.val_j is not None:
                summary += f"; val J&F {(final.val_j + final.val_f) / 2:.4f}"
        return checkpoint, summary
