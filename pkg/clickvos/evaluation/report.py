import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import GapError
from .metrics import boundary_f, db_statistics, region_j


log = logging.getLogger(__name__)

CSV_HEADER = ("sequence", "object_id", "frame", "J", "F", "JF")
ALL = "ALL"
MEAN = "mean"


@dataclass
class FrameScore:
    sequence: str
    object_id: int
    frame: int          # 1-based
    j: float
    f: float


@dataclass
class ObjectSummary:
    sequence: str
    object_id: int
    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float


@dataclass
class EvalReport:
    frames: List[FrameScore] = field(default_factory=list)
    objects: List[ObjectSummary] = field(default_factory=list)
    sequences: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    j: float = 0.0
    f: float = 0.0

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2.0

    def sequence_jf(self, name: str) -> float:
        j, f = self.sequences[name]
        return (j + f) / 2.0

    def rows(self) -> List[Tuple]:
        out = [(s.sequence, s.object_id, s.frame, s.j, s.f, (s.j + s.f) / 2.0) for s in self.frames]
        out += [(o.sequence, o.object_id, MEAN, o.j_mean, o.f_mean, (o.j_mean + o.f_mean) / 2.0)
                for o in self.objects]
        out += [(name, MEAN, MEAN, j, f, (j + f) / 2.0) for name, (j, f) in self.sequences.items()]
        out.append((ALL, MEAN, MEAN, self.j, self.f, self.jf))
        return out


def scored_frames(num_frames: int, include_first: bool = True, first_frame_only: bool = False) -> List[int]:
    if first_frame_only:
        return [0] if num_frames else []
    return list(range(0 if include_first else 1, num_frames))


def find_gaps(pred: Mapping[str, np.ndarray], gt: Mapping[str, np.ndarray]) -> List[str]:
    gaps = []
    for name in sorted(gt):
        if name not in pred:
            gaps.append(f"missing sequence '{name}'")
            continue
        p, g = np.asarray(pred[name]), np.asarray(gt[name])
        if p.shape[0] != g.shape[0]:
            gaps.append(f"sequence '{name}': {p.shape[0]} predicted frame(s) vs {g.shape[0]} ground-truth frame(s)")
        elif p.shape != g.shape:
            gaps.append(f"sequence '{name}': predicted shape {p.shape} vs ground truth {g.shape}")
    for name in sorted(set(pred) - set(gt)):
        gaps.append(f"unexpected sequence '{name}' without ground truth")
    return gaps


def evaluate_sequence(
    name: str,
    pred: np.ndarray,
    gt: np.ndarray,
    include_first: bool = True,
    first_frame_only: bool = False,
    tolerance: Optional[int] = None,
) -> Tuple[List[FrameScore], List[ObjectSummary]]:
    pred, gt = np.asarray(pred), np.asarray(gt)
    frames = scored_frames(gt.shape[0], include_first, first_frame_only)
    object_ids = [int(v) for v in np.unique(gt) if v != 0]
    scores, summaries = [], []
    for oid in object_ids:
        js, fs = [], []
        for t in frames:
            j = region_j(pred[t] == oid, gt[t] == oid)
            f = boundary_f(pred[t] == oid, gt[t] == oid, tolerance)
            scores.append(FrameScore(name, oid, t + 1, j, f))
            js.append(j)
            fs.append(f)
        if not frames:
            continue
        summaries.append(ObjectSummary(name, oid, *db_statistics(js), *db_statistics(fs)))
    return scores, summaries


def evaluate(
    pred: Mapping[str, np.ndarray],
    gt: Mapping[str, np.ndarray],
    include_first: bool = True,
    first_frame_only: bool = False,
    tolerance: Optional[int] = None,
    jobs: int = 1,
) -> EvalReport:
    """Object mean per sequence, then mean over sequences; background is not scored."""
    gaps = find_gaps(pred, gt)
    if gaps:
        raise GapError(gaps)

    names = sorted(gt)

    def _one(name):
        return evaluate_sequence(name, pred[name], gt[name], include_first, first_frame_only, tolerance)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, names))
    else:
        results = [_one(name) for name in names]

    report = EvalReport()
    for name, (scores, summaries) in zip(names, results):
        report.frames.extend(scores)
        report.objects.extend(summaries)
        if not summaries:
            log.warning(f"[clickvos.evaluate] sequence '{name}' has nothing to score")
            continue
        report.sequences[name] = (
            float(np.mean([s.j_mean for s in summaries])),
            float(np.mean([s.f_mean for s in summaries])),
        )
    if report.sequences:
        report.j = float(np.mean([j for j, _ in report.sequences.values()]))
        report.f = float(np.mean([f for _, f in report.sequences.values()]))
    log.info(f"[clickvos.evaluate] {len(report.sequences)} sequence(s): "
             f"J={report.j:.4f} F={report.f:.4f} J&F={report.jf:.4f}")
    return report


def write_csv(report: EvalReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for row in report.rows():
            writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    return path


def write_statistics_csv(report: EvalReport, path) -> Path:
    """Per-object DAVIS statistics: mean, recall and decay of J and F."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("sequence", "object_id", "J_M", "J_R", "J_D", "F_M", "F_R", "F_D"))
        for o in report.objects:
            writer.writerow([o.sequence, o.object_id] + [
                f"{v:.6f}" for v in (o.j_mean, o.j_recall, o.j_decay, o.f_mean, o.f_recall, o.f_decay)
            ])
    return path
