from typing import Optional

import numpy as np

from ..annotation.points import PointSet
from .scene import PALETTE


ALPHA = 0.5
BACKGROUND_CLICK_COLOR = (0.0, 0.0, 0.0)
OUTLINE_COLOR = (1.0, 1.0, 1.0)


def label_color(label: int):
    return PALETTE[(int(label) - 1) % len(PALETTE)]


def _cross(out: np.ndarray, x: int, y: int, color, arm: int) -> None:
    h, w = out.shape[:2]
    out[max(y - arm, 0):min(y + arm + 1, h), x] = color
    out[y, max(x - arm, 0):min(x + arm + 1, w)] = color


def render_overlay(frame: np.ndarray, mask: np.ndarray, points: Optional[PointSet] = None,
                   alpha: float = ALPHA) -> np.ndarray:
    """Blend per-object colours over ``frame``; clicks become 3x3 crosses with a white outline."""
    out = np.asarray(frame, dtype=np.float64).copy()
    mask = np.asarray(mask)
    for label in (int(v) for v in np.unique(mask) if v != 0):
        sel = mask == label
        out[sel] = (1.0 - alpha) * out[sel] + alpha * np.asarray(label_color(label))
    if points is not None:
        for p in points:
            _cross(out, p.x, p.y, OUTLINE_COLOR, 2)
            _cross(out, p.x, p.y, BACKGROUND_CLICK_COLOR if p.object_id == 0 else label_color(p.object_id), 1)
    return np.clip(out, 0.0, 1.0)
