"""Point-tracking baseline: advect each click by the flow, then region-grow around it."""

import logging
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from ..annotation.points import PointSet
from ..data.video import VideoSample


log = logging.getLogger(__name__)

DEFAULT_TAU = 0.15
CROSS_3X3 = ndimage.generate_binary_structure(2, 1)


def advect_point(point: Tuple[int, int], flow: np.ndarray) -> Tuple[int, int]:
    """p + flow(p), rounded half up and clamped to the image."""
    h, w = flow.shape[:2]
    x, y = int(point[0]), int(point[1])
    dx, dy = (float(v) for v in flow[y, x])
    nx = int(np.floor(x + dx + 0.5))
    ny = int(np.floor(y + dy + 0.5))
    return min(max(nx, 0), w - 1), min(max(ny, 0), h - 1)


def region_grow(image: np.ndarray, seed: Tuple[int, int], tau: float = DEFAULT_TAU) -> np.ndarray:
    """4-connected component of the seed among pixels within ``tau`` of the seed colour."""
    if tau < 0:
        raise ValueError(f"[clickvos.region_grow] tau must be >= 0, got {tau}")
    image = np.asarray(image, dtype=np.float64)
    x, y = seed
    distance = np.linalg.norm(image - image[y, x], axis=-1)
    admitted = distance <= tau + 1e-12
    labels, _ = ndimage.label(admitted, structure=CROSS_3X3)
    return labels == labels[y, x]


def track_points(sample: VideoSample, points: PointSet) -> List[Dict[int, Tuple[int, int]]]:
    """Per frame, tracked (x, y) of every object point (background excluded)."""
    current = {p.object_id: (p.x, p.y) for p in points if p.object_id != 0}
    tracks = [dict(current)]
    for t in range(1, sample.num_frames):
        current = {oid: advect_point(xy, sample.flow[t]) for oid, xy in current.items()}
        tracks.append(dict(current))
    return tracks


def _resolve(grown: Dict[int, np.ndarray], seeds: Dict[int, Tuple[int, int]], shape) -> np.ndarray:
    out = np.zeros(shape, dtype=np.uint8)
    ids = sorted(grown)
    if not ids:
        return out
    stack = np.stack([grown[i] for i in ids])
    coverage = stack.sum(axis=0)
    for k, oid in enumerate(ids):
        out[stack[k] & (coverage == 1)] = oid

    contested = coverage > 1
    if contested.any():
        ys, xs = np.nonzero(contested)
        best = np.full(ys.shape, np.inf)
        winner = np.zeros(ys.shape, dtype=np.uint8)
        for k, oid in enumerate(ids):
            sx, sy = seeds[oid]
            d = np.hypot(xs - sx, ys - sy)
            take = stack[k][ys, xs] & (d < best)
            best[take] = d[take]
            winner[take] = oid
        out[ys, xs] = winner
    return out


def run_baseline(sample: VideoSample, points: PointSet, tau: float = DEFAULT_TAU) -> np.ndarray:
    masks = np.zeros((sample.num_frames, sample.height, sample.width), dtype=np.uint8)
    for t, seeds in enumerate(track_points(sample, points)):
        grown = {oid: region_grow(sample.frames[t], xy, tau) for oid, xy in seeds.items()}
        masks[t] = _resolve(grown, seeds, masks.shape[1:])
    log.debug(f"[clickvos.run_baseline] '{sample.name}': tracked {len(points) - 1} point(s) over {sample.num_frames} frames")
    return masks
