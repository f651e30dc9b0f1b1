"""Region (J) and boundary (F) similarity in the DAVIS style."""

import math
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from ..errors import ShapeError


CROSS_3X3 = ndimage.generate_binary_structure(2, 1)
DECAY_BINS = 4


def _pair(pred: np.ndarray, gt: np.ndarray, kind: str) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ShapeError(kind, [list(pred.shape), list(gt.shape)], "prediction and ground truth differ")
    return pred, gt


def region_j(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _pair(pred, gt, "region_j")
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, gt).sum() / union)


def default_tolerance(height: int, width: int) -> int:
    return max(1, math.ceil(0.008 * math.hypot(height, width)))


def boundary_map(mask: np.ndarray) -> np.ndarray:
    """Set pixels with a 4-neighbour outside the mask; the image edge counts as outside."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    interior = ndimage.binary_erosion(mask, structure=CROSS_3X3, border_value=0)
    return mask & ~interior


def _near(boundary: np.ndarray, tolerance: int) -> np.ndarray:
    if not boundary.any():
        return boundary
    square = np.ones((2 * tolerance + 1, 2 * tolerance + 1), dtype=bool)
    return ndimage.binary_dilation(boundary, structure=square, border_value=0)


def boundary_f(pred: np.ndarray, gt: np.ndarray, tolerance: Optional[int] = None) -> float:
    """F-measure of boundary pixels matched within Chebyshev distance ``tolerance``."""
    pred, gt = _pair(pred, gt, "boundary_f")
    if tolerance is None:
        tolerance = default_tolerance(*gt.shape)
    if tolerance < 1:
        raise ValueError(f"[clickvos.boundary_f] tolerance must be >= 1 px, got {tolerance}")
    pred_b = boundary_map(pred)
    gt_b = boundary_map(gt)
    n_pred, n_gt = int(pred_b.sum()), int(gt_b.sum())
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    precision = float((pred_b & _near(gt_b, tolerance)).sum()) / n_pred
    recall = float((gt_b & _near(pred_b, tolerance)).sum()) / n_gt
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def db_statistics(scores) -> Tuple[float, float, float]:
    """Mean, recall (share of frames above 0.5) and decay (first-quarter minus last-quarter mean).

    Decay is 0 for fewer than four frames.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return 0.0, 0.0, 0.0
    mean = float(scores.mean())
    recall = float((scores > 0.5).mean())
    if scores.size < DECAY_BINS:
        return mean, recall, 0.0
    bins = np.array_split(scores, DECAY_BINS)
    return mean, recall, float(bins[0].mean() - bins[-1].mean())
