import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..errors import UsageError
from ..evaluation.report import evaluate
from ..model.abs_net import load_model
from ..model.config import DENSEMEM_MODES, MODALITIES, OBJMEM_MODES
from ..presets import resolve_config
from ..training.trainer import train
from .common import load_dataset, require_dir
from .infer import predict_dataset


log = logging.getLogger(__name__)

CKPT_SUFFIX = ".absw"
ABLATION_HEADER = ("modality", "objmem", "densemem", "JF", "J", "F", "checkpoint")

# (modality, objmem, densemem); memory rows first, then the encoder rows.
ABLATION_GRID: List[Tuple[str, str, str]] = [
    ("bimodal_enhance", "first_only", "off"),
    ("bimodal_enhance", "all", "off"),
    ("bimodal_enhance", "first_only", "on"),
    ("bimodal_enhance", "all", "on"),
    ("appearance_only", "all", "on"),
    ("concat_fuse", "all", "on"),
]


@dataclass
class AblationRow:
    modality: str
    objmem: str
    densemem: str
    j: float
    f: float
    checkpoint: str

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2.0

    def row(self) -> Tuple:
        return (self.modality, self.objmem, self.densemem,
                f"{self.jf:.6f}", f"{self.j:.6f}", f"{self.f:.6f}", self.checkpoint)


_NAME_PATTERN = re.compile(
    rf"^({'|'.join(MODALITIES)})_({'|'.join(OBJMEM_MODES)})_({'|'.join(DENSEMEM_MODES)}){re.escape(CKPT_SUFFIX)}$"
)


def checkpoint_name(modality: str, objmem: str, densemem: str) -> str:
    return f"{modality}_{objmem}_{densemem}{CKPT_SUFFIX}"


def parse_checkpoint_name(path: Path) -> Optional[Tuple[str, str, str]]:
    match = _NAME_PATTERN.match(path.name)
    return match.groups() if match else None


def write_ablation_csv(rows: List[AblationRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ABLATION_HEADER)
        for r in rows:
            writer.writerow(r.row())
    return path


class Ablate:

    @classmethod
    def INPUT_TYPES(cls) -> Dict[str, Any]:
        return {
            "required": {
                "data": ("STRING", {"tooltip": "Held-out sequences."}),
                "ckpt_dir": ("STRING", {"tooltip": "Directory of <modality>_<objmem>_<densemem>.absw checkpoints."}),
            },
            "optional": {
                "out": ("STRING", {"default": "ablation.csv"}),
                "seed": ("INT", {"default": 0}),
                "config": ("STRING", {"default": "", "tooltip": "Training config for missing grid entries."}),
                "train_data": ("STRING", {"default": "", "tooltip": "Training sequences for missing grid entries."}),
                "jobs": ("INT", {"default": 1, "min": 1}),
            },
        }

    RETURN_TYPES = ("LIST", "STRING")
    RETURN_NAMES = ("rows", "summary")
    FUNCTION = "ablate"
    CATEGORY = "clickvos/evaluation"

    HELP_TEXT = """Runs infer and eval for every checkpoint of the memory/encoder grid and writes one CSV row per configuration.
With --train-data, grid entries without a checkpoint are trained first using --config and the entry's flags."""

    def _train_missing(self, ckpt_dir: Path, config: str, train_data: str) -> None:
        samples = [s for _, s in load_dataset(require_dir(train_data, "train_data"))]
        for modality, objmem, densemem in ABLATION_GRID:
            target = ckpt_dir / checkpoint_name(modality, objmem, densemem)
            if target.is_file():
                continue
            log.info(f"[clickvos.Ablate] training missing grid entry {target.name}")
            model_config, train_config = resolve_config(
                config or None, {"modality": modality, "objmem": objmem, "densemem": densemem}
            )
            train(train_config, samples, model_config, checkpoint_path=target)

    def ablate(self, data: str, ckpt_dir: str, out: str = "ablation.csv", seed: int = 0, config: str = "",
               train_data: str = "", jobs: int = 1, **kwargs) -> Tuple[List[AblationRow], str]:
        if train_data:
            root = Path(ckpt_dir).expanduser()
            root.mkdir(parents=True, exist_ok=True)
        root = require_dir(ckpt_dir, "ckpt_dir")
        if train_data:
            self._train_missing(root, config, train_data)

        dataset = load_dataset(require_dir(data, "data"))
        truth = {seq_dir.name: sample.masks for seq_dir, sample in dataset}

        rows: List[AblationRow] = []
        for path in sorted(root.glob(f"*{CKPT_SUFFIX}")):
            entry = parse_checkpoint_name(path)
            if entry is None:
                log.warning(f"[clickvos.Ablate] '{path.name}' does not follow <modality>_<objmem>_<densemem>; skipped")
                continue
            model = load_model(path)
            predictions = predict_dataset(model, dataset, "auto", seed, jobs)
            report = evaluate(predictions, truth, jobs=jobs)
            modality, objmem, densemem = model.config.modality, model.config.objmem, model.config.densemem
            if (modality, objmem, densemem) != entry:
                log.warning(f"[clickvos.Ablate] '{path.name}' stores {modality}/{objmem}/{densemem}; using the stored config")
            rows.append(AblationRow(modality, objmem, densemem, report.j, report.f, path.name))
            log.info(f"[clickvos.Ablate] {path.name}: J&F={rows[-1].jf:.4f}")

        if not rows:
            raise UsageError(f"[clickvos.Ablate] no *{CKPT_SUFFIX} checkpoints under {root}")
        write_ablation_csv(rows, Path(out).expanduser())
        width = max(len(r.checkpoint) for r in rows)
        lines = [f"{r.checkpoint:<{width}}  J&F {r.jf:.4f}  J {r.j:.4f}  F {r.f:.4f}" for r in rows]
        return rows, "\n".join(lines)
