"""Moving-shapes scenes with analytically exact forward flow."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..errors import SceneSpecError
from .flow import encode_flow
from .netpbm import quantize
from .video import VideoSample


log = logging.getLogger(__name__)

SHAPE_KINDS = ("rectangle", "ellipse", "triangle")

PALETTE = (
    (0.90, 0.10, 0.10),
    (0.10, 0.75, 0.15),
    (0.15, 0.25, 0.95),
    (0.95, 0.85, 0.10),
    (0.85, 0.15, 0.85),
    (0.10, 0.85, 0.90),
    (1.00, 0.55, 0.05),
    (0.55, 0.10, 0.95),
)

NOISE_CELL = 8


@dataclass
class ObjectSpec:
    kind: str
    size: Tuple[float, float]                   # (width, height) px
    color: Tuple[float, float, float]
    position: Tuple[float, float]               # centre (x, y) in frame 1
    velocity: Tuple[float, float] = (0.0, 0.0)  # px/frame
    rotation: float = 0.0                       # rad/frame
    angle: float = 0.0                          # rad in frame 1


@dataclass
class SceneSpec:
    height: int
    width: int
    frames: int
    objects: List[ObjectSpec] = field(default_factory=list)
    background_seed: int = 0
    occlusion: bool = True
    seed: int = 0
    background_motion: Tuple[int, int] = (0, 0)
    v_max: float = 4.0
    max_objects: int = 3
    name: str = ""


def _validate(spec: SceneSpec) -> None:
    if spec.height < 1 or spec.width < 1 or spec.frames < 1:
        raise SceneSpecError(f"[clickvos.gen_sequence] invalid canvas {spec.height}x{spec.width}x{spec.frames}")
    if not 1 <= len(spec.objects) <= spec.max_objects:
        raise SceneSpecError(
            f"[clickvos.gen_sequence] object count {len(spec.objects)} outside [1, {spec.max_objects}]"
        )
    if spec.v_max <= 0:
        raise SceneSpecError(f"[clickvos.gen_sequence] v_max must be positive, got {spec.v_max}")
    bx, by = spec.background_motion
    if int(bx) != bx or int(by) != by or max(abs(bx), abs(by)) > spec.v_max:
        raise SceneSpecError(f"[clickvos.gen_sequence] background motion {spec.background_motion} invalid")
    for k, obj in enumerate(spec.objects, start=1):
        if obj.kind not in SHAPE_KINDS:
            raise SceneSpecError(f"[clickvos.gen_sequence] object {k}: unknown shape kind '{obj.kind}'")
        if min(obj.size) <= 0:
            raise SceneSpecError(f"[clickvos.gen_sequence] object {k}: size must be positive")
        if max(abs(obj.velocity[0]), abs(obj.velocity[1])) > spec.v_max:
            raise SceneSpecError(f"[clickvos.gen_sequence] object {k}: velocity exceeds v_max {spec.v_max}")


def _pose(obj: ObjectSpec, t: int) -> Tuple[np.ndarray, float]:
    centre = np.array(obj.position, dtype=np.float64) + t * np.array(obj.velocity, dtype=np.float64)
    return centre, obj.angle + t * obj.rotation


def _local(obj: ObjectSpec, t: int, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    centre, theta = _pose(obj, t)
    dx, dy = xs - centre[0], ys - centre[1]
    c, s = math.cos(theta), math.sin(theta)
    return c * dx + s * dy, -s * dx + c * dy


def _inside(obj: ObjectSpec, lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
    w, h = obj.size
    if obj.kind == "rectangle":
        return (lx >= -w / 2) & (lx < w / 2) & (ly >= -h / 2) & (ly < h / 2)
    if obj.kind == "ellipse":
        return (lx / (w / 2)) ** 2 + (ly / (h / 2)) ** 2 <= 1.0
    # isosceles triangle, apex up
    return (ly <= h / 2) & (np.abs(lx) <= (w / 2) * (ly + h / 2) / h)


def rasterize(spec: SceneSpec, t: int) -> np.ndarray:
    """Painter's-order label map of frame index t: later objects cover earlier ones."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    labels = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for k, obj in enumerate(spec.objects, start=1):
        lx, ly = _local(obj, t, xs, ys)
        labels[_inside(obj, lx, ly)] = k
    return labels


def background_texture(height: int, width: int, seed: int) -> np.ndarray:
    """Seeded value noise in [0.25, 0.75], bilinear over an 8-px lattice."""
    rng = np.random.default_rng(seed)
    gh = height // NOISE_CELL + 2
    gw = width // NOISE_CELL + 2
    lattice = rng.uniform(0.25, 0.75, size=(gh, gw, 3))
    smooth = ndimage.zoom(lattice, (NOISE_CELL, NOISE_CELL, 1), order=1)
    return smooth[:height, :width]


def _motion(spec: SceneSpec, labels_prev: np.ndarray, t: int) -> np.ndarray:
    """Displacement t-1 -> t for every pixel of frame t-1."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    flow = np.empty((spec.height, spec.width, 2), dtype=np.float64)
    flow[..., 0] = spec.background_motion[0]
    flow[..., 1] = spec.background_motion[1]
    for k, obj in enumerate(spec.objects, start=1):
        sel = labels_prev == k
        if not sel.any():
            continue
        lx, ly = _local(obj, t - 1, xs[sel], ys[sel])
        centre, theta = _pose(obj, t)
        c, s = math.cos(theta), math.sin(theta)
        qx = centre[0] + c * lx - s * ly
        qy = centre[1] + s * lx + c * ly
        flow[sel, 0] = qx - xs[sel]
        flow[sel, 1] = qy - ys[sel]
    return flow


def gen_sequence(spec: SceneSpec) -> VideoSample:
    _validate(spec)
    H, W, T = spec.height, spec.width, spec.frames
    bx, by = (int(v) for v in spec.background_motion)
    pad = T * max(abs(bx), abs(by))
    texture = background_texture(H + 2 * pad, W + 2 * pad, spec.background_seed)

    labels = np.stack([rasterize(spec, t) for t in range(T)])
    present = set(np.unique(labels[0]).tolist())
    for k in range(1, len(spec.objects) + 1):
        if k not in present:
            raise SceneSpecError(f"[clickvos.gen_sequence] object {k} is not visible in frame 1")
    if not spec.occlusion and _overlaps(spec):
        raise SceneSpecError(f"[clickvos.gen_sequence] objects overlap in '{spec.name}' but occlusion is not allowed")

    frames = np.empty((T, H, W, 3), dtype=np.float64)
    for t in range(T):
        oy, ox = pad - t * by, pad - t * bx
        frame = texture[oy:oy + H, ox:ox + W].copy()
        for k, obj in enumerate(spec.objects, start=1):
            frame[labels[t] == k] = obj.color
        # frames live on the 8-bit grid so PPM round-trips are lossless
        frames[t] = quantize(frame) / 255.0

    flow = np.zeros((T, H, W, 2), dtype=np.float64)
    for t in range(1, T):
        flow[t] = _motion(spec, labels[t - 1], t)
    if T > 1:
        flow[0] = flow[1]
    if np.abs(flow).max(initial=0.0) > spec.v_max + 1e-9:
        raise SceneSpecError(f"[clickvos.gen_sequence] flow exceeds v_max {spec.v_max}; slow the rotation down")
    flow = flow.astype(np.float32)

    sample = VideoSample(
        frames=frames,
        flow=flow,
        flow_images=encode_flow(flow, spec.v_max),
        masks=labels,
        object_ids=list(range(1, len(spec.objects) + 1)),
        v_max=spec.v_max,
        seed=spec.seed,
        name=spec.name,
    )
    log.debug(f"[clickvos.gen_sequence] rendered '{spec.name}' {T}x{H}x{W} with {len(spec.objects)} object(s)")
    return sample


def _overlaps(spec: SceneSpec) -> bool:
    ys, xs = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    for t in range(spec.frames):
        cover = np.zeros((spec.height, spec.width), dtype=np.int32)
        for obj in spec.objects:
            lx, ly = _local(obj, t, xs, ys)
            cover += _inside(obj, lx, ly)
        if cover.max() > 1:
            return True
    return False


def _random_object(rng: np.random.Generator, height: int, width: int, frames: int,
                   color, max_speed: int) -> ObjectSpec:
    side = min(height, width)
    for _ in range(200):
        w = float(rng.integers(max(3, side // 5), max(4, side * 2 // 5) + 1))
        h = float(rng.integers(max(3, side // 5), max(4, side * 2 // 5) + 1))
        v = (float(rng.integers(-max_speed, max_speed + 1)), float(rng.integers(-max_speed, max_speed + 1)))
        margin_x, margin_y = w / 2 + 1, h / 2 + 1
        x0 = float(rng.integers(int(margin_x), int(width - margin_x) + 1))
        y0 = float(rng.integers(int(margin_y), int(height - margin_y) + 1))
        x1, y1 = x0 + v[0] * (frames - 1), y0 + v[1] * (frames - 1)
        if margin_x <= x1 <= width - margin_x and margin_y <= y1 <= height - margin_y:
            kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
            return ObjectSpec(kind=kind, size=(w, h), color=color, position=(x0, y0), velocity=v)
    return ObjectSpec(kind="rectangle", size=(side / 4, side / 4), color=color,
                      position=(width / 2, height / 2))


def random_scene_spec(
    rng: np.random.Generator,
    height: int,
    width: int,
    frames: int,
    num_objects: int,
    occlusion: bool = False,
    max_speed: int = 2,
    v_max: float = 4.0,
    name: str = "",
    seed: int = 0,
) -> SceneSpec:
    """Random objects whose whole trajectories stay inside the canvas."""
    for _ in range(100):
        colors = rng.permutation(len(PALETTE))[:num_objects]
        objects = [_random_object(rng, height, width, frames, PALETTE[int(c)], max_speed) for c in colors]
        spec = SceneSpec(
            height=height, width=width, frames=frames, objects=objects,
            background_seed=int(rng.integers(2**31)), occlusion=occlusion, seed=seed,
            v_max=v_max, max_objects=max(num_objects, 1), name=name,
        )
        if not occlusion and _overlaps(spec):
            continue
        if set(np.unique(rasterize(spec, 0)).tolist()) >= set(range(num_objects + 1)):
            return spec
    log.warning(f"[clickvos.random_scene_spec] could not satisfy constraints for '{name}'; using last draw")
    spec.occlusion = spec.occlusion or _overlaps(spec)
    return spec


def occlusion_scene_spec(
    rng: np.random.Generator,
    height: int,
    width: int,
    frames: int,
    v_max: float = 4.0,
    name: str = "",
    seed: int = 0,
) -> SceneSpec:
    """Two objects: object 1 slides horizontally behind a static object 2."""
    side = min(height, width)
    c1, c2 = (PALETTE[int(i)] for i in rng.permutation(len(PALETTE))[:2])
    speed = max(1, min(int(v_max), int(math.ceil((width * 0.6) / max(frames - 1, 1)))))
    w1 = float(max(4, side // 5))
    y = float(rng.integers(int(height * 0.35), int(height * 0.65) + 1))
    x0 = w1 / 2 + 1
    mover = ObjectSpec(kind="ellipse", size=(w1, w1), color=c1, position=(x0, y), velocity=(float(speed), 0.0))
    mid_x = min(width - side / 6 - 1, x0 + speed * (frames - 1) / 2)
    blocker = ObjectSpec(kind="rectangle", size=(float(max(6, side // 3)), float(max(6, side // 3))),
                         color=c2, position=(float(round(mid_x)), y))
    return SceneSpec(
        height=height, width=width, frames=frames, objects=[mover, blocker],
        background_seed=int(rng.integers(2**31)), occlusion=True, seed=seed,
        v_max=v_max, max_objects=2, name=name,
    )


def make_specs(
    num: int,
    height: int,
    width: int,
    frames: int,
    num_objects: int,
    seed: int,
    occlusion_every: int = 0,
    prefix: str = "seq",
) -> List[SceneSpec]:
    """``num`` specs; every ``occlusion_every``-th one is a crossing-behind scene."""
    root = np.random.SeedSequence(seed)
    specs = []
    for i, child in enumerate(root.spawn(num)):
        rng = np.random.default_rng(child)
        name = f"{prefix}_{i:04d}"
        if occlusion_every and i % occlusion_every == 0:
            specs.append(occlusion_scene_spec(rng, height, width, frames, name=name, seed=seed))
        else:
            specs.append(random_scene_spec(rng, height, width, frames, num_objects, name=name, seed=seed))
    return specs
