import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..data.video import VideoSample
from ..errors import ConfigError
from ..model.abs_net import ABSNet, load_model
from .common import (
    POINT_MODES,
    load_dataset,
    parallel_map,
    require_dir,
    require_file,
    resolve_points,
    sequence_seed,
    write_prediction,
)


log = logging.getLogger(__name__)


def predict_dataset(model: ABSNet, dataset: Sequence[Tuple[Path, VideoSample]], points: str = "auto",
                    seed: int = 0, jobs: int = 1) -> Dict[str, np.ndarray]:
    """``{sequence directory name: predicted masks}``; parameters are shared read-only."""

    def _one(item):
        index, (seq_dir, sample) = item
        clicks = resolve_points(seq_dir, sample, points, sequence_seed(seed, index))
        return seq_dir.name, model.infer_video(sample, clicks).masks

    return dict(parallel_map(_one, list(enumerate(dataset)), jobs))


class Infer:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "ckpt": ("STRING", {"tooltip": "Checkpoint written by train."}),
                "data": ("STRING", {}),
                "out": ("STRING", {"tooltip": "Predicted masks go to <out>/<seq>/masks/*.pgm."}),
            },
            "optional": {
                "points": (POINT_MODES, {"default": "auto",
                                         "tooltip": "auto: sample clicks from frame-1 masks; file: read <seq>/points.json."}),
                "seed": ("INT", {"default": 0}),
                "objmem": (["first_only", "all"], {"default": None}),
                "densemem": (["on", "off"], {"default": None}),
                "modality": (["appearance_only", "concat_fuse", "bimodal_enhance"], {"default": None,
                             "tooltip": "Must match the checkpoint; given only as a guard."}),
                "jobs": ("INT", {"default": 1, "min": 1}),
            },
        }

    RETURN_TYPES = ("LIST", "STRING")
    RETURN_NAMES = ("sequences", "summary")
    FUNCTION = "infer"
    CATEGORY = "clickvos/model"

    HELP_TEXT = """Segments every sequence from its frame-1 clicks, growing the object and dense memories frame by frame.
--objmem and --densemem switch the memory policy of a trained checkpoint without retraining."""

    def infer(self, ckpt: str, data: str, out: str, points: str = "auto", seed: int = 0,
              objmem: str = None, densemem: str = None, modality: str = None, jobs: int = 1,
              **kwargs) -> Tuple[List[str], str]:
        model = load_model(require_file(ckpt, "ckpt"), objmem=objmem, densemem=densemem)
        if modality is not None and modality != model.config.modality:
            raise ConfigError(
                f"[clickvos.Infer] checkpoint was trained with modality '{model.config.modality}', not '{modality}'"
            )
        dataset = load_dataset(require_dir(data, "data"))
        predictions = predict_dataset(model, dataset, points, seed, jobs)

        root = Path(out).expanduser()
        for name, masks in predictions.items():
            write_prediction(root, name, masks)
        log.info(f"[clickvos.Infer] wrote predictions for {len(predictions)} sequence(s) to {root}")
        return list(predictions), f"{len(predictions)} sequence(s) segmented into {root}"
