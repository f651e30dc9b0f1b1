import logging
from typing import Optional, Union

import numpy as np

from .morphology import dilate_mask, erode_mask


log = logging.getLogger(__name__)

MAX_STEPS = 32


def corrupt_mask(
    mask: np.ndarray,
    fraction: float = 0.3,
    seed: Union[int, np.random.Generator, None] = 0,
    max_steps: int = MAX_STEPS,
) -> np.ndarray:
    """Per object, erode or dilate (3x3) until ``fraction`` of its area has changed.

    Erosion that would wipe the object out switches to dilation. Objects are
    repainted in id order, so a grown object may cover a neighbour.
    """
    if fraction < 0.0:
        raise ValueError(f"[clickvos.corrupt_mask] fraction must be >= 0, got {fraction}")
    mask = np.asarray(mask)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = np.zeros_like(mask)
    for oid in (int(v) for v in np.unique(mask) if v != 0):
        region = mask == oid
        area = int(region.sum())
        grow = bool(rng.integers(2))
        current = region
        for _ in range(max_steps):
            if int((current ^ region).sum()) >= fraction * area:
                break
            if not grow:
                shrunk = erode_mask(current, 1)
                if shrunk.any():
                    current = shrunk
                    continue
                grow, current = True, region
            current = dilate_mask(current, 1)
        out[current] = oid
        log.debug(f"[clickvos.corrupt_mask] object {oid}: {'dilated' if grow else 'eroded'}, "
                  f"{int((current ^ region).sum())}/{area} px changed")
    return out
