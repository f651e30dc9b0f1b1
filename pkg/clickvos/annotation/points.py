"""Single-click annotations: one point per object plus one background point."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import AnnotationError, SchemaError
from .morphology import erode_mask, erosion_depth


log = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class Point:
    x: int
    y: int
    object_id: int
    fallback: bool = False


@dataclass
class PointSet:
    """Points ordered by object id, background (id 0) first."""

    points: List[Point] = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.object_id)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    @property
    def ids(self) -> List[int]:
        return [p.object_id for p in self.points]

    @property
    def num_objects(self) -> int:
        return sum(1 for p in self.points if p.object_id != 0)

    def by_id(self) -> Dict[int, Point]:
        return {p.object_id: p for p in self.points}

    def coords(self) -> List[Tuple[int, int]]:
        return [(p.x, p.y) for p in self.points]

    def to_dict(self) -> dict:
        lookup = self.by_id()
        bg = lookup.get(0)
        return {
            "background": {"x": bg.x, "y": bg.y} if bg else None,
            "objects": [{"id": p.object_id, "x": p.x, "y": p.y} for p in self.points if p.object_id != 0],
        }

    def validate(self, gt_mask: np.ndarray) -> None:
        """Raise SchemaError unless ids match frame-1 labels and every point sits in its region."""
        gt_mask = np.asarray(gt_mask)
        h, w = gt_mask.shape
        present = sorted(int(v) for v in np.unique(gt_mask) if v != 0)
        ids = [i for i in self.ids if i != 0]
        if 0 not in self.ids:
            raise SchemaError("[clickvos.PointSet] missing background point")
        if ids != present:
            raise SchemaError(f"[clickvos.PointSet] point ids {ids} do not match mask labels {present}")
        for p in self.points:
            if not (0 <= p.x < w and 0 <= p.y < h):
                raise SchemaError(f"[clickvos.PointSet] point {p.object_id} at ({p.x}, {p.y}) outside {w}x{h}")
            if int(gt_mask[p.y, p.x]) != p.object_id:
                raise SchemaError(
                    f"[clickvos.PointSet] point {p.object_id} at ({p.x}, {p.y}) lies on label {int(gt_mask[p.y, p.x])}"
                )


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_point(mask: np.ndarray, seed: SeedLike = None) -> Tuple[int, int]:
    """Uniformly random set pixel of ``mask`` as (x, y)."""
    cells = np.argwhere(np.asarray(mask, dtype=bool))
    if cells.size == 0:
        raise AnnotationError("[clickvos.sample_point] cannot sample from an empty mask")
    row, col = cells[int(_rng(seed).integers(len(cells)))]
    return int(col), int(row)


def annotate_first_frame(
    gt_mask: np.ndarray,
    seed: SeedLike = 0,
    object_ids: Optional[Sequence[int]] = None,
) -> PointSet:
    gt_mask = np.asarray(gt_mask)
    rng = _rng(seed)
    if object_ids is None:
        object_ids = [int(v) for v in np.unique(gt_mask) if v != 0]
    if not object_ids:
        raise AnnotationError("[clickvos.annotate_first_frame] mask holds no object label")

    background = gt_mask == 0
    if not background.any():
        raise AnnotationError("[clickvos.annotate_first_frame] mask holds no background pixel")
    x, y = sample_point(background, rng)
    points = [Point(x, y, 0)]

    for oid in sorted(object_ids):
        region = gt_mask == oid
        if not region.any():
            raise AnnotationError(f"[clickvos.annotate_first_frame] object {oid} has zero pixels")
        eroded = erode_mask(region, erosion_depth(region))
        fallback = not eroded.any()
        if fallback:
            log.warning(f"[clickvos.annotate_first_frame] object {oid} vanishes under erosion; sampling the full mask")
            eroded = region
        x, y = sample_point(eroded, rng)
        points.append(Point(x, y, oid, fallback))
    return PointSet(points)


def _coord(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"[clickvos.load_points] {what} must be an integer, got {value!r}")
    return value


def parse_points(data: dict, shape: Optional[Tuple[int, int]] = None) -> PointSet:
    if not isinstance(data, dict):
        raise SchemaError("[clickvos.load_points] top level must be an object")
    bg = data.get("background")
    if not isinstance(bg, dict):
        raise SchemaError("[clickvos.load_points] missing background point")
    points = [Point(_coord(bg.get("x"), "background.x"), _coord(bg.get("y"), "background.y"), 0)]

    objects = data.get("objects", [])
    if not isinstance(objects, list):
        raise SchemaError("[clickvos.load_points] 'objects' must be a list")
    seen = set()
    for entry in objects:
        if not isinstance(entry, dict):
            raise SchemaError("[clickvos.load_points] object entries must be objects")
        oid = _coord(entry.get("id"), "object id")
        if oid <= 0:
            raise SchemaError(f"[clickvos.load_points] object id must be >= 1, got {oid}")
        if oid in seen:
            raise SchemaError(f"[clickvos.load_points] duplicate object id {oid}")
        seen.add(oid)
        points.append(Point(_coord(entry.get("x"), f"object {oid} x"), _coord(entry.get("y"), f"object {oid} y"), oid))

    if shape is not None:
        h, w = shape
        for p in points:
            if not (0 <= p.x < w and 0 <= p.y < h):
                raise SchemaError(f"[clickvos.load_points] point {p.object_id} at ({p.x}, {p.y}) outside {w}x{h}")
    return PointSet(points)


def load_points(path, gt_mask: Optional[np.ndarray] = None, shape: Optional[Tuple[int, int]] = None) -> PointSet:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"[clickvos.load_points] points file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"[clickvos.load_points] {path}: invalid JSON: {e}") from e
    if gt_mask is not None and shape is None:
        shape = np.asarray(gt_mask).shape
    points = parse_points(data, shape)
    if gt_mask is not None:
        points.validate(gt_mask)
    return points


def write_points(path, points: PointSet) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(points.to_dict(), f, ensure_ascii=False, indent=2)
    return path
