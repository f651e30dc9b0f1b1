import logging
from pathlib import Path
from typing import Any, Dict, Tuple

from ..errors import UsageError
from ..evaluation.report import EvalReport, evaluate, write_csv, write_statistics_csv
from .common import load_mask_sets, require_dir


log = logging.getLogger(__name__)


class Evaluate:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "pred": ("STRING", {"tooltip": "Predictions: <pred>/<seq>/masks/*.pgm or <pred>/<seq>/*.pgm."}),
                "gt": ("STRING", {"tooltip": "Ground-truth dataset directory."}),
            },
            "optional": {
                "out": ("STRING", {"default": "report.csv"}),
                "stats": ("STRING", {"default": "", "tooltip": "Optional CSV of per-object mean/recall/decay."}),
                "first_frame_only": ("BOOLEAN", {"default": False}),
                "exclude_first": ("BOOLEAN", {"default": False}),
                "jobs": ("INT", {"default": 1, "min": 1}),
            },
        }

    RETURN_TYPES = ("REPORT", "STRING")
    RETURN_NAMES = ("report", "summary")
    FUNCTION = "evaluate"
    CATEGORY = "clickvos/evaluation"
    DEFAULT_COMMAND_NAME = "eval"

    HELP_TEXT = """Scores predictions against ground truth with region J (IoU) and boundary F.
Objects are averaged per sequence, then sequences are averaged; J&F is the mean of J and F.
Missing sequences or frame-count mismatches abort with a list of the gaps."""

    def evaluate(self, pred: str, gt: str, out: str = "report.csv", stats: str = "",
                 first_frame_only: bool = False, exclude_first: bool = False, jobs: int = 1,
                 **kwargs) -> Tuple[EvalReport, str]:
        if first_frame_only and exclude_first:
            raise UsageError("[clickvos.Evaluate] --first-frame-only and --exclude-first are exclusive")
        predictions = load_mask_sets(require_dir(pred, "pred"))
        truth = load_mask_sets(require_dir(gt, "gt"))
        report = evaluate(predictions, truth, include_first=not exclude_first,
                          first_frame_only=first_frame_only, jobs=jobs)
        write_csv(report, Path(out).expanduser())
        if stats:
            write_statistics_csv(report, Path(stats).expanduser())
        summary = f"J={report.j:.4f} F={report.f:.4f} J&F={report.jf:.4f} over {len(report.sequences)} sequence(s)"
        return report, summary
