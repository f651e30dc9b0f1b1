import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ..annotation.corruption import corrupt_mask
from ..annotation.points import annotate_first_frame
from ..data.scene import gen_sequence, random_scene_spec
from .metrics import region_j


log = logging.getLogger(__name__)


@dataclass
class SelfHealResult:
    median_j: List[float] = field(default_factory=list)         # per frame, 1-based order
    trajectories: Dict[str, List[List[float]]] = field(default_factory=dict)

    @property
    def healed(self) -> bool:
        """Median object J at the last frame exceeds that at frame 2."""
        return len(self.median_j) >= 2 and self.median_j[-1] > self.median_j[1]


def selfheal_suite(
    model,
    num: int = 10,
    seed: int = 0,
    fraction: float = 0.3,
    height: int = 64,
    width: int = 64,
    frames: int = 8,
) -> SelfHealResult:
    """Feed a corrupted frame-1 mask to memory and follow per-frame object J."""
    root = np.random.SeedSequence(seed)
    per_frame: List[List[float]] = [[] for _ in range(frames)]
    result = SelfHealResult()
    for i, child in enumerate(root.spawn(num)):
        rng = np.random.default_rng(child)
        name = f"heal_{i:04d}"
        sample = gen_sequence(random_scene_spec(rng, height, width, frames, 2, name=name, seed=seed))
        points = annotate_first_frame(sample.masks[0], rng)
        corrupted = corrupt_mask(sample.masks[0], fraction, rng)
        masks = model.infer_video(sample, points, first_mask_override=corrupted).masks
        tracks = []
        for oid in sample.object_ids:
            js = [region_j(masks[t] == oid, sample.masks[t] == oid) for t in range(frames)]
            tracks.append(js)
            for t, j in enumerate(js):
                per_frame[t].append(j)
        result.trajectories[name] = tracks
    result.median_j = [float(np.median(js)) if js else 0.0 for js in per_frame]
    log.info(f"[clickvos.selfheal_suite] median J frame 2 {result.median_j[1] if frames > 1 else float('nan'):.4f} "
             f"-> frame {frames} {result.median_j[-1]:.4f}")
    return result
