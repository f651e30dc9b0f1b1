import math

import numpy as np

from ..engine import functional as F
from ..engine.tensor import Tensor
from ..errors import ShapeError


DICE_EPS = 1e-6


def _pixel_rows(logits: Tensor, gt: np.ndarray):
    n, h, w = logits.shape
    gt = np.asarray(gt)
    if gt.shape != (h, w):
        raise ShapeError("loss", [logits.shape, list(gt.shape)], "ground truth must match the logits' H x W")
    labels = gt.reshape(-1).astype(np.int64)
    if labels.size and labels.max() >= n:
        raise ShapeError("loss", [logits.shape], f"label {labels.max()} needs more than {n} channels")
    rows = F.transpose(F.reshape(logits, (n, h * w)), (1, 0))
    one_hot = np.zeros((h * w, n))
    one_hot[np.arange(h * w), labels] = 1.0
    return rows, one_hot, labels


def pixel_cross_entropy(logits: Tensor, gt: np.ndarray) -> Tensor:
    """(H*W,) per-pixel cross-entropy."""
    rows, one_hot, _ = _pixel_rows(logits, gt)
    picked = F.sum_(F.mul(F.log_softmax(rows), F.constant(one_hot)), axis=1)
    return F.scalar_mul(picked, -1.0)


def loss_bootstrapped_ce(logits: Tensor, gt: np.ndarray, ratio: float = 0.4) -> Tensor:
    """Mean of the largest ceil(ratio * H * W) per-pixel cross-entropies."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"[clickvos.loss_bootstrapped_ce] ratio must lie in (0, 1], got {ratio}")
    ce = pixel_cross_entropy(logits, gt)
    total = ce.shape[0]
    k = max(1, min(total, math.ceil(ratio * total - 1e-9)))
    order = np.argsort(-ce.data.numpy(), kind="stable")[:k]
    return F.mean(F.gather_rows(ce, order))


def loss_dice(logits: Tensor, gt: np.ndarray, eps: float = DICE_EPS) -> Tensor:
    """1 - mean soft dice over the classes present in ``gt``, background included."""
    rows, one_hot, labels = _pixel_rows(logits, gt)
    probs = F.softmax(rows)
    intersection = F.sum_(F.mul(probs, F.constant(one_hot)), axis=0)
    denominator = F.add(F.sum_(probs, axis=0), F.constant(one_hot.sum(axis=0) + eps))
    dice = F.div(F.scalar_mul(intersection, 2.0), denominator)
    present = np.unique(labels)
    return F.sub(F.constant(1.0), F.mean(F.gather_rows(dice, present)))
