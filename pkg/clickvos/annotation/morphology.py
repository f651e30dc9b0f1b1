import numpy as np
from scipy import ndimage


STRUCTURE_3X3 = np.ones((3, 3), dtype=bool)


def erode_mask(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """Binary erosion with a full 3x3 element; pixels outside the image count as unset."""
    if iterations < 0:
        raise ValueError(f"[clickvos.erode_mask] iterations must be >= 0, got {iterations}")
    mask = np.asarray(mask, dtype=bool)
    # scipy treats iterations=0 as "repeat until stable"
    if iterations == 0 or not mask.any():
        return mask.copy()
    return ndimage.binary_erosion(mask, structure=STRUCTURE_3X3, iterations=iterations, border_value=0)


def dilate_mask(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    if iterations < 0:
        raise ValueError(f"[clickvos.dilate_mask] iterations must be >= 0, got {iterations}")
    mask = np.asarray(mask, dtype=bool)
    if iterations == 0 or not mask.any():
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=STRUCTURE_3X3, iterations=iterations, border_value=0)


def erosion_depth(mask: np.ndarray) -> int:
    """max(1, floor(0.1 * shorter bounding-box side))."""
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return 1
    bbox_h = int(rows.max() - rows.min() + 1)
    bbox_w = int(cols.max() - cols.min() + 1)
    return max(1, min(bbox_h, bbox_w) // 10)
